// SPDX-License-Identifier: Apache-2.0

//! Pretty-printer. Output re-parses to the same IR and is byte-stable.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::expr::Cmp;
use crate::ir::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for imp in &p.imports {
        let _ = writeln!(out, "import gen \"{}\" as {};", imp.path, imp.alias);
    }
    for (i, c) in p.components.iter().enumerate() {
        if i > 0 || !p.imports.is_empty() {
            out.push('\n');
        }
        print_component_into(&mut out, c);
    }
    out
}

pub fn print_component(c: &Component) -> String {
    let mut out = String::new();
    print_component_into(&mut out, c);
    out
}

fn print_component_into(out: &mut String, c: &Component) {
    out.push_str(&print_signature(&c.sig));
    match &c.body {
        None => out.push_str(";\n"),
        Some(body) => {
            out.push_str(" {\n");
            print_block(out, body, 1);
            out.push_str("}\n");
        }
    }
}

/// The signature header on one line, without the body or trailing `;`.
pub fn print_signature(sig: &Signature) -> String {
    let mut out = String::new();
    match &sig.kind {
        SigKind::Source => {}
        SigKind::External => out.push_str("ext "),
        SigKind::Generated { tool } => {
            let _ = write!(out, "gen {tool} ");
        }
    }
    let _ = write!(out, "comp {}", sig.name);
    if !sig.params.is_empty() {
        out.push('[');
        for (i, p) in sig.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&p.name);
            if let Some(d) = &p.default {
                let _ = write!(out, "={d}");
            }
        }
        out.push(']');
    }
    if !sig.events.is_empty() {
        out.push('<');
        for (i, e) in sig.events.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "'{}:{}", e.name, e.delay);
        }
        out.push('>');
    }
    out.push('(');
    print_ports(&mut out, &sig.inputs);
    out.push(')');
    if !sig.outputs.is_empty() {
        out.push_str(" -> (");
        print_ports(&mut out, &sig.outputs);
        out.push(')');
    }
    if !sig.lets.is_empty() || !sig.out_params.is_empty() {
        out.push_str(" with {");
        for (name, value) in &sig.lets {
            let _ = write!(out, " let {name} = {value};");
        }
        if !sig.out_params.is_empty() {
            let _ = write!(out, " some {}", sig.out_params.join(", "));
            if !sig.out_constraints.is_empty() {
                let _ = write!(out, " where {}", cmps(&sig.out_constraints, ", "));
            }
            out.push(';');
        }
        out.push_str(" }");
    }
    if !sig.where_clauses.is_empty() {
        let _ = write!(out, " where {}", cmps(&sig.where_clauses, ", "));
    }
    out
}

fn cmps(cs: &[Cmp], sep: &str) -> String {
    let parts: Vec<String> = cs.iter().map(|c| alloc::format!("{c}")).collect();
    parts.join(sep)
}

fn print_ports(out: &mut String, ports: &[PortDef]) {
    for (i, p) in ports.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&print_port(p));
    }
}

pub fn print_port(p: &PortDef) -> String {
    let mut out = p.name.clone();
    for d in &p.dims {
        let _ = write!(out, "[{d}]");
    }
    out.push_str(": ");
    if p.index_vars.iter().any(|v| v != "_") {
        let _ = write!(out, "for<{}> ", p.index_vars.join(", "));
    }
    if let Some(live) = &p.live {
        let _ = write!(out, "{live} ");
    }
    let _ = write!(out, "{}", p.width);
    out
}

pub fn print_port_ref(r: &PortRef) -> String {
    let mut out = String::new();
    let indices = match r {
        PortRef::Const(n) => return alloc::format!("{n}"),
        PortRef::Local { port, indices } => {
            out.push_str(port);
            indices
        }
        PortRef::InvocOut {
            invoc,
            port,
            indices,
        } => {
            let _ = write!(out, "{invoc}.{port}");
            indices
        }
    };
    for idx in indices {
        match idx {
            Index::At(e) => {
                let _ = write!(out, "[{e}]");
            }
            Index::Range(lo, hi) => {
                let _ = write!(out, "[{lo}..{hi}]");
            }
            Index::Full => out.push_str("[..]"),
        }
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn invocation_tail(events: &[Time], args: &[PortRef]) -> String {
    let evs: Vec<String> = events.iter().map(|t| alloc::format!("{t}")).collect();
    let args: Vec<String> = args.iter().map(print_port_ref).collect();
    alloc::format!("<{}>({})", evs.join(", "), args.join(", "))
}

fn print_block(out: &mut String, cmds: &[Command], depth: usize) {
    let mut i = 0;
    while i < cmds.len() {
        let cmd = &cmds[i];
        indent(out, depth);
        match &cmd.kind {
            CommandKind::Instance {
                name,
                comp,
                tool,
                args,
                avail,
            } => {
                let _ = write!(out, "{name} := new ");
                if let Some(t) = tool {
                    let _ = write!(out, "{t}.");
                }
                out.push_str(comp);
                if !args.is_empty() {
                    let args: Vec<String> = args.iter().map(|a| alloc::format!("{a}")).collect();
                    let _ = write!(out, "[{}]", args.join(", "));
                }
                if let Some(a) = avail {
                    let _ = write!(out, " in {a}");
                }
                // Re-sugar `x := new C; x := x<..>(..)` into the combined form.
                if let Some(Command {
                    kind:
                        CommandKind::Invoke {
                            name: iname,
                            inst,
                            events,
                            args,
                        },
                    ..
                }) = cmds.get(i + 1)
                {
                    if iname == name && inst == name {
                        out.push_str(&invocation_tail(events, args));
                        i += 1;
                    }
                }
                out.push_str(";\n");
            }
            CommandKind::Invoke {
                name,
                inst,
                events,
                args,
            } => {
                let _ = writeln!(out, "{name} := {inst}{};", invocation_tail(events, args));
            }
            CommandKind::Connect { dst, src } => {
                let _ = writeln!(out, "{} = {};", print_port_ref(dst), print_port_ref(src));
            }
            CommandKind::Bundle(def) => {
                let _ = writeln!(out, "bundle {};", print_port(def));
            }
            CommandKind::For { var, lo, hi, body } => {
                let _ = writeln!(out, "for {var} in {lo}..{hi} {{");
                print_block(out, body, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
            CommandKind::If { .. } => print_if(out, cmd, depth),
            CommandKind::Let { name, value } => {
                let _ = writeln!(out, "let {name} = {value};");
            }
            CommandKind::Assume(cs) => {
                let _ = writeln!(out, "assume {};", cmps(cs, " && "));
            }
            CommandKind::OutAssign { param, value } => {
                let _ = writeln!(out, "{param} <- {value};");
            }
        }
        i += 1;
    }
}

fn print_if(out: &mut String, cmd: &Command, depth: usize) {
    let CommandKind::If {
        cond,
        then,
        otherwise,
    } = &cmd.kind
    else {
        return;
    };
    let _ = writeln!(out, "if {} {{", cmps(cond, " && "));
    print_block(out, then, depth + 1);
    indent(out, depth);
    match otherwise.as_slice() {
        [] => out.push_str("}\n"),
        [nested @ Command {
            kind: CommandKind::If { .. },
            ..
        }] => {
            out.push_str("} else ");
            print_if(out, nested, depth);
        }
        cmds => {
            out.push_str("} else {\n");
            print_block(out, cmds, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    fn strip_spans(p: &mut Program) {
        fn block(cmds: &mut [Command]) {
            for c in cmds {
                c.span = Span::default();
                match &mut c.kind {
                    CommandKind::For { body, .. } => block(body),
                    CommandKind::If {
                        then, otherwise, ..
                    } => {
                        block(then);
                        block(otherwise);
                    }
                    CommandKind::Bundle(def) => def.span = Span::default(),
                    _ => {}
                }
            }
        }
        for i in &mut p.imports {
            i.span = Span::default();
        }
        for c in &mut p.components {
            c.sig.span = Span::default();
            for port in c.sig.inputs.iter_mut().chain(c.sig.outputs.iter_mut()) {
                port.span = Span::default();
            }
            if let Some(b) = &mut c.body {
                block(b);
            }
        }
    }

    fn round_trip(src: &str) {
        let mut a = parse(src).unwrap();
        let text = print_program(&a);
        let mut b = parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(print_program(&b), text);
        strip_spans(&mut a);
        strip_spans(&mut b);
        assert_eq!(a, b, "{text}");
    }

    #[test]
    fn signature_one_line() {
        let p = parse(
            "ext comp FPE16_4<'G:1>(clk: 1, X: ['G, 'G+1] 23, Y: ['G, 'G+1] 23) -> (R: ['G+3, 'G+4] 23);",
        )
        .unwrap();
        assert_eq!(
            print_program(&p),
            "ext comp FPE16_4<'G:1>(clk: 1, X: ['G, 'G+1] 23, Y: ['G, 'G+1] 23) -> (R: ['G+3, 'G+4] 23);\n"
        );
    }

    #[test]
    fn round_trips() {
        round_trip("comp C<'G:1>() -> () {}");
        round_trip(
            "import gen \"fp.toml\" as fp;\n\
             gen fp comp FPExp[E, M]<'G:1>(X: ['G, 'G+1] W) -> (R: ['G+L, 'G+L+1] W) \
             with { let W = E+M+3; some L; };\n\
             comp IterFFT[N, B=N/2]<'G:L>(in0[N][2]: ['G, 'G+1] 32) -> (out[N][2]: ['G+L, 'G+L+1] 32) \
             with { some L where L > 0; } where N > 1 {\n\
               if B < 2 && N > 4 { L <- 1 } else if B < 4 { L <- 2; assume N >= 2 } else { L <- (N-1)*(2-1) }\n\
               for i in 0..N/2 { out{i}{..} = in0{i*2}{0..2}; }\n\
               m := new fp.FPExp[8, 23] in ['G, 'G+2]<'G>(in0[0][0]);\n\
               n := m<'G+1>(3)\n\
             }",
        );
    }

    #[test]
    fn else_if_chain_prints_flat() {
        let p = parse(
            "comp S[W]<'G:1>() -> () with { some L; } {\n\
             if W < 4 { L <- 0 } else if W < 9 { L <- 2 } else { L <- 4 } }",
        )
        .unwrap();
        let text = print_program(&p);
        assert!(text.contains("} else if W < 9 {\n"), "{text}");
    }
}
