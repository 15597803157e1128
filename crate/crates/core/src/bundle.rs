// SPDX-License-Identifier: Apache-2.0

//! Bundle elimination on parameter-free programs.
//!
//! Signature bundles become one scalar port per element: `in[2]` turns
//! into `in0` and `in1`, and `p[2][3]` into `p_0_0` .. `p_1_2` (row-major).
//! Local bundles disappear: every read of an element is replaced by the
//! value written to it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::eval::{ElabError, ElabErrorKind};
use crate::expr::Expr;
use crate::ir::*;

/// Name of one element of a split port.
pub fn scalar_name(base: &str, idx: &[u64]) -> String {
    match idx {
        [] => base.to_string(),
        [i] => format!("{base}{i}"),
        _ => {
            let mut s = base.to_string();
            for i in idx {
                s.push('_');
                s.push_str(&i.to_string());
            }
            s
        }
    }
}

/// All index tuples of `dims` in row-major order.
pub fn indices(dims: &[u64]) -> Vec<Vec<u64>> {
    let mut out = alloc::vec![Vec::new()];
    for &d in dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..d).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

fn bundle_err(comp: &str, span: Span, msg: String) -> ElabError {
    ElabError::new(ElabErrorKind::Bundle(msg), comp, span)
}

fn concrete_dims(def: &PortDef, comp: &str) -> Result<Vec<u64>, ElabError> {
    def.dims
        .iter()
        .map(|d| {
            d.as_nat().ok_or_else(|| {
                bundle_err(comp, def.span, format!("bundle `{}` has symbolic size `{d}`", def.name))
            })
        })
        .collect()
}

/// One scalar port per element of `def`.
pub fn split_port(def: &PortDef, comp: &str) -> Result<Vec<PortDef>, ElabError> {
    if def.dims.is_empty() {
        return Ok(alloc::vec![def.clone()]);
    }
    let dims = concrete_dims(def, comp)?;
    let mut out = Vec::new();
    for idx in indices(&dims) {
        let map: BTreeMap<String, Expr> = def
            .index_vars
            .iter()
            .zip(&idx)
            .map(|(v, i)| (v.clone(), Expr::Nat(*i)))
            .collect();
        let live = match &def.live {
            Some(l) => {
                let l = l.subst(&map);
                let norm = |e: &Expr| {
                    e.normalize().map_err(|e| {
                        ElabError::new(ElabErrorKind::Eval(e), comp, def.span)
                    })
                };
                Some(Interval::new(
                    Time::new(l.start.event.clone(), norm(&l.start.offset)?),
                    Time::new(l.end.event.clone(), norm(&l.end.offset)?),
                ))
            }
            None => None,
        };
        out.push(PortDef {
            name: scalar_name(&def.name, &idx),
            dims: Vec::new(),
            index_vars: Vec::new(),
            live,
            width: def.width.clone(),
            span: def.span,
        });
    }
    Ok(out)
}

pub fn split_signature(sig: &Signature) -> Result<Signature, ElabError> {
    let split = |ports: &[PortDef]| -> Result<Vec<PortDef>, ElabError> {
        let mut out = Vec::new();
        for p in ports {
            out.extend(split_port(p, &sig.name)?);
        }
        Ok(out)
    };
    Ok(Signature {
        inputs: split(&sig.inputs)?,
        outputs: split(&sig.outputs)?,
        ..sig.clone()
    })
}

/// A single wire.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Scalar {
    Local(String, Vec<u64>),
    Inv(String, String, Vec<u64>),
    Const(u64),
}

impl Scalar {
    fn port_ref(&self) -> PortRef {
        match self {
            Scalar::Local(p, idx) => PortRef::local(scalar_name(p, idx)),
            Scalar::Inv(inv, p, idx) => PortRef::InvocOut {
                invoc: inv.clone(),
                port: scalar_name(p, idx),
                indices: Vec::new(),
            },
            Scalar::Const(n) => PortRef::Const(*n),
        }
    }
}

struct Ctx<'a> {
    prog: &'a Program,
    comp: &'a Component,
    bundles: BTreeMap<String, Vec<u64>>,
    /// invocation -> component of its instance
    invs: BTreeMap<String, String>,
}

impl Ctx<'_> {
    fn name(&self) -> &str {
        &self.comp.sig.name
    }

    fn child(&self, inv: &str, span: Span) -> Result<&Signature, ElabError> {
        self.invs
            .get(inv)
            .and_then(|c| self.prog.get(c))
            .map(|c| &c.sig)
            .ok_or_else(|| bundle_err(self.name(), span, format!("unknown invocation `{inv}`")))
    }

    fn dims_of(&self, r: &PortRef, span: Span) -> Result<Vec<u64>, ElabError> {
        match r {
            PortRef::Const(_) => Ok(Vec::new()),
            PortRef::Local { port, .. } => {
                if let Some(d) = self.bundles.get(port) {
                    return Ok(d.clone());
                }
                let sig = &self.comp.sig;
                let def = sig
                    .input(port)
                    .or_else(|| sig.output(port))
                    .ok_or_else(|| bundle_err(self.name(), span, format!("unknown port `{port}`")))?;
                concrete_dims(def, self.name())
            }
            PortRef::InvocOut { invoc, port, .. } => {
                let child = self.child(invoc, span)?;
                let def = child.output(port).ok_or_else(|| {
                    bundle_err(self.name(), span, format!("`{}` has no output `{port}`", child.name))
                })?;
                concrete_dims(def, self.name())
            }
        }
    }

    /// Elements selected by `r`, row-major over the free positions.
    fn expand(&self, r: &PortRef, span: Span) -> Result<Vec<Scalar>, ElabError> {
        if let PortRef::Const(n) = r {
            return Ok(alloc::vec![Scalar::Const(*n)]);
        }
        let dims = self.dims_of(r, span)?;
        let given = r.indices();
        if given.len() > dims.len() {
            return Err(bundle_err(self.name(), span, "too many indices".into()));
        }
        let mut ranges: Vec<Vec<u64>> = Vec::new();
        for (k, &d) in dims.iter().enumerate() {
            let nat = |e: &Expr| {
                e.as_nat()
                    .ok_or_else(|| bundle_err(self.name(), span, format!("symbolic index `{e}`")))
            };
            let range: Vec<u64> = match given.get(k).unwrap_or(&Index::Full) {
                Index::At(e) => alloc::vec![nat(e)?],
                Index::Range(lo, hi) => (nat(lo)?..nat(hi)?).collect(),
                Index::Full => (0..d).collect(),
            };
            if let Some(bad) = range.iter().find(|&&i| i >= d) {
                return Err(bundle_err(
                    self.name(),
                    span,
                    format!("index {bad} out of bounds for size {d}"),
                ));
            }
            ranges.push(range);
        }
        let mut tuples = alloc::vec![Vec::new()];
        for range in &ranges {
            tuples = tuples
                .into_iter()
                .flat_map(|prefix: Vec<u64>| {
                    range.iter().map(move |i| {
                        let mut p = prefix.clone();
                        p.push(*i);
                        p
                    })
                })
                .collect();
        }
        Ok(tuples
            .into_iter()
            .map(|idx| match r {
                PortRef::Local { port, .. } => Scalar::Local(port.clone(), idx),
                PortRef::InvocOut { invoc, port, .. } => Scalar::Inv(invoc.clone(), port.clone(), idx),
                PortRef::Const(_) => unreachable!(),
            })
            .collect())
    }

    fn is_bundle(&self, s: &Scalar) -> bool {
        matches!(s, Scalar::Local(p, _) if self.bundles.contains_key(p))
    }
}

fn collect(cmds: &[Command], bundles: &mut BTreeMap<String, PortDef>, invs: &mut BTreeMap<String, String>) {
    let mut insts = BTreeMap::new();
    for c in cmds {
        if let CommandKind::Instance { name, comp, .. } = &c.kind {
            insts.insert(name.clone(), comp.clone());
        }
    }
    for c in cmds {
        match &c.kind {
            CommandKind::Bundle(def) => {
                bundles.insert(def.name.clone(), def.clone());
            }
            CommandKind::Invoke { name, inst, .. } => {
                if let Some(comp) = insts.get(inst) {
                    invs.insert(name.clone(), comp.clone());
                }
            }
            _ => {}
        }
    }
}

/// Eliminates bundles in one component of `prog`. Returns the component
/// and lint messages for elements written but never read.
pub fn eliminate_bundles(c: &Component, prog: &Program) -> Result<(Component, Vec<String>), ElabError> {
    let comp = c.sig.name.as_str();
    let sig = split_signature(&c.sig)?;
    let Some(body) = &c.body else {
        return Ok((Component { sig, body: None }, Vec::new()));
    };
    let mut defs = BTreeMap::new();
    let mut invs = BTreeMap::new();
    collect(body, &mut defs, &mut invs);
    let bundles = defs
        .iter()
        .map(|(n, d)| Ok((n.clone(), concrete_dims(d, comp)?)))
        .collect::<Result<_, ElabError>>()?;
    let ctx = Ctx {
        prog,
        comp: c,
        bundles,
        invs,
    };
    let mut writes: BTreeMap<Scalar, (Scalar, Span)> = BTreeMap::new();
    let mut kept: Vec<(Command, Vec<(Scalar, Scalar)>, Vec<Scalar>)> = Vec::new();
    for cmd in body {
        let span = cmd.span;
        match &cmd.kind {
            CommandKind::Bundle(_) => {}
            CommandKind::Connect { dst, src } => {
                let d = ctx.expand(dst, span)?;
                let s = ctx.expand(src, span)?;
                let s = if s.len() == 1 && d.len() > 1 && matches!(s[0], Scalar::Const(_)) {
                    alloc::vec![s[0].clone(); d.len()]
                } else {
                    s
                };
                if d.len() != s.len() {
                    return Err(bundle_err(
                        comp,
                        span,
                        format!("connection of {} element(s) to {}", s.len(), d.len()),
                    ));
                }
                let mut pairs = Vec::new();
                for (d, s) in d.into_iter().zip(s) {
                    if ctx.is_bundle(&d) {
                        if writes.insert(d.clone(), (s, span)).is_some() {
                            let Scalar::Local(b, idx) = &d else { unreachable!() };
                            return Err(bundle_err(
                                comp,
                                span,
                                format!("`{}` is written twice", elem(b, idx)),
                            ));
                        }
                    } else {
                        pairs.push((d, s));
                    }
                }
                if !pairs.is_empty() {
                    kept.push((cmd.clone(), pairs, Vec::new()));
                }
            }
            CommandKind::Invoke { args, .. } => {
                let mut flat = Vec::new();
                for a in args {
                    flat.extend(ctx.expand(a, span)?);
                }
                kept.push((cmd.clone(), Vec::new(), flat));
            }
            _ => kept.push((cmd.clone(), Vec::new(), Vec::new())),
        }
    }
    let mut read = BTreeSet::new();
    let resolve = |s: &Scalar, span: Span, read: &mut BTreeSet<Scalar>| -> Result<Scalar, ElabError> {
        let mut cur = s.clone();
        let mut seen = BTreeSet::new();
        while ctx.is_bundle(&cur) {
            read.insert(cur.clone());
            if !seen.insert(cur.clone()) {
                let Scalar::Local(b, idx) = &cur else { unreachable!() };
                return Err(bundle_err(comp, span, format!("`{}` is defined in terms of itself", elem(b, idx))));
            }
            match writes.get(&cur) {
                Some((next, _)) => cur = next.clone(),
                None => {
                    let Scalar::Local(b, idx) = &cur else { unreachable!() };
                    return Err(bundle_err(
                        comp,
                        span,
                        format!("`{}` is read but never written", elem(b, idx)),
                    ));
                }
            }
        }
        Ok(cur)
    };
    let mut out = Vec::new();
    for (cmd, pairs, args) in kept {
        let span = cmd.span;
        match &cmd.kind {
            CommandKind::Connect { .. } => {
                for (d, s) in pairs {
                    let s = resolve(&s, span, &mut read)?;
                    out.push(Command::new(
                        CommandKind::Connect {
                            dst: d.port_ref(),
                            src: s.port_ref(),
                        },
                        span,
                    ));
                }
            }
            CommandKind::Invoke {
                name, inst, events, ..
            } => {
                let args = args
                    .iter()
                    .map(|a| resolve(a, span, &mut read).map(|s| s.port_ref()))
                    .collect::<Result<_, _>>()?;
                out.push(Command::new(
                    CommandKind::Invoke {
                        name: name.clone(),
                        inst: inst.clone(),
                        events: events.clone(),
                        args,
                    },
                    span,
                ));
            }
            _ => out.push(cmd),
        }
    }
    let lints = writes
        .iter()
        .filter(|(k, _)| !read.contains(*k))
        .map(|(k, (_, span))| {
            let Scalar::Local(b, idx) = k else { unreachable!() };
            format!("{span}: in `{comp}`: `{}` is written but never read", elem(b, idx))
        })
        .collect();
    Ok((
        Component {
            sig,
            body: Some(out),
        },
        lints,
    ))
}

fn elem(b: &str, idx: &[u64]) -> String {
    let mut s = b.to_string();
    for i in idx {
        s.push_str(&format!("[{i}]"));
    }
    s
}

/// Eliminates bundles in every component.
pub fn eliminate_program(prog: &Program) -> Result<(Program, Vec<String>), ElabError> {
    let mut comps = Vec::new();
    let mut lints = Vec::new();
    for c in &prog.components {
        let (c, l) = eliminate_bundles(c, prog)?;
        comps.push(c);
        lints.extend(l);
    }
    Ok((
        Program {
            imports: prog.imports.clone(),
            components: comps,
        },
        lints,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::print_program;
    use crate::parse::parse;

    #[test]
    fn foo_golden() {
        let p = parse(
            "comp Foo<'G:1>(in[2]: for<i> ['G+i,'G+i+1] 32) -> (out: ['G, 'G+1] 32) {\n\
               bundle A[2]: for<i> ['G, G+1] 32;\n\
               A[0] = in[0]; out = A[0]; }",
        )
        .unwrap();
        let (q, lints) = eliminate_program(&p).unwrap();
        assert_eq!(
            print_program(&q),
            "comp Foo<'G:1>(in0: ['G, 'G+1] 32, in1: ['G+1, 'G+2] 32) -> (out: ['G, 'G+1] 32) {\n  out = in0;\n}\n"
        );
        assert!(lints.is_empty());
    }

    #[test]
    fn names() {
        assert_eq!(scalar_name("in", &[1]), "in1");
        assert_eq!(scalar_name("p", &[1, 0]), "p_1_0");
        assert_eq!(scalar_name("x", &[]), "x");
        assert_eq!(indices(&[2, 2]), [[0, 0], [0, 1], [1, 0], [1, 1]]);
    }

    #[test]
    fn errors_and_lints() {
        let dangling = parse(
            "comp C<'G:1>() -> (o: ['G, 'G+1] 8) { bundle b[2]: ['G, 'G+1] 8; b[0] = 1; o = b[1]; }",
        )
        .unwrap();
        let e = eliminate_program(&dangling).unwrap_err();
        assert!(e.to_string().contains("`b[1]` is read but never written"), "{e}");
        let twice = parse(
            "comp C<'G:1>() -> (o: ['G, 'G+1] 8) { bundle b[1]: ['G, 'G+1] 8; b[0] = 1; b[0] = 2; o = b[0]; }",
        )
        .unwrap();
        assert!(eliminate_program(&twice).unwrap_err().to_string().contains("written twice"));
        let unread = parse("comp C<'G:1>() -> () { bundle b[1]: ['G, 'G+1] 8; b[0] = 1; }").unwrap();
        let (_, lints) = eliminate_program(&unread).unwrap();
        assert_eq!(lints.len(), 1);
    }

    #[test]
    fn ranges_and_invocations_flatten() {
        let p = parse(
            "ext comp K<'G:1>(x[2][2]: ['G, 'G+1] 8) -> (y[2]: ['G, 'G+1] 8);\n\
             comp C<'G:1>(a[4]: ['G, 'G+1] 8) -> (o[2]: ['G, 'G+1] 8) {\n\
               bundle t[2][2]: ['G, 'G+1] 8;\n\
               t[0][0..2] = a[0..2]; t[1][..] = a[2..4];\n\
               k := new K<'G>(t); o[..] = k.y; }",
        )
        .unwrap();
        let (q, _) = eliminate_program(&p).unwrap();
        let text = print_program(&q);
        assert!(text.contains("ext comp K<'G:1>(x_0_0: ['G, 'G+1] 8, x_0_1: ['G, 'G+1] 8, x_1_0"), "{text}");
        assert!(text.contains("k := new K<'G>(a0, a1, a2, a3);"), "{text}");
        assert!(text.contains("o0 = k.y0;\n  o1 = k.y1;"), "{text}");
        let (again, _) = eliminate_program(&q).unwrap();
        assert_eq!(again, q);
    }
}
