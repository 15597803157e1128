// SPDX-License-Identifier: Apache-2.0

//! Elaboration: monomorphize a program from its entry component.
//!
//! Children are expanded depth-first while their parent is evaluated, so
//! a child's output parameters are known before any sibling that reads
//! them. Identical `(component, arguments)` pairs share one definition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::emit::print_signature;
use crate::eval::{
    bind_named, bind_params, check_where, concrete_signature, eval_component, mangle, ElabError,
    ElabErrorKind, Instantiate, Unit,
};
use crate::expr::Binding;
use crate::gen::{concretize_signature, Generator};
use crate::ir::*;

pub use crate::order::topo_order;

#[derive(Clone, Debug)]
pub struct Options {
    pub depth_limit: usize,
    /// Share one definition between identical instantiations.
    pub dedup: bool,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            depth_limit: 64,
            dedup: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnitSource {
    Evaluated,
    External,
    Generated { tool: String, verilog: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElabUnit {
    pub comp: String,
    pub args: Vec<u64>,
    pub name: String,
    pub source: UnitSource,
    pub outs: Binding,
    /// Output parameters of children, as seen by this unit's body.
    pub injected: Binding,
}

#[derive(Clone, Debug, Default)]
pub struct Elaborated {
    pub entry: String,
    /// Parameter-free source components, children before parents.
    pub components: Vec<Component>,
    pub externals: Vec<Signature>,
    pub units: Vec<ElabUnit>,
}

impl Elaborated {
    /// Externals followed by components.
    pub fn program(&self) -> Program {
        let mut p = self.externals_program();
        p.components.extend(self.components.iter().cloned());
        p
    }

    pub fn externals_program(&self) -> Program {
        Program {
            imports: Vec::new(),
            components: self
                .externals
                .iter()
                .map(|s| Component {
                    sig: s.clone(),
                    body: None,
                })
                .collect(),
        }
    }

    pub fn unit(&self, name: &str) -> Option<&ElabUnit> {
        self.units.iter().find(|u| u.name == name)
    }

    /// One block per unit: its key, its source, the child bindings it saw
    /// and its own output parameters.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "entry {}", self.entry);
        for u in &self.units {
            let args: Vec<String> = u.args.iter().map(|a| a.to_string()).collect();
            let _ = write!(out, "unit {} = {}[{}] ", u.name, u.comp, args.join(", "));
            match &u.source {
                UnitSource::Evaluated => out.push_str("evaluated\n"),
                UnitSource::External => out.push_str("external\n"),
                UnitSource::Generated { tool, verilog } => {
                    let _ = writeln!(out, "generated by {tool} verilog {verilog}");
                }
            }
            for (k, v) in &u.injected {
                let _ = writeln!(out, "  bind {k} = {v}");
            }
            for (k, v) in &u.outs {
                let _ = writeln!(out, "  out {k} = {v}");
            }
        }
        out
    }
}

struct Elab<'a> {
    prog: &'a Program,
    gen: &'a mut dyn Generator,
    opts: Options,
    memo: BTreeMap<(String, Vec<u64>), Unit>,
    names: BTreeSet<String>,
    stack: Vec<String>,
    out: Elaborated,
}

/// Elaborates `entry` with parameters given by name. Missing parameters
/// take their defaults.
pub fn elaborate(
    prog: &Program,
    entry: &str,
    params: &Binding,
    gen: &mut dyn Generator,
    opts: Options,
) -> Result<Elaborated, ElabError> {
    let comp = prog.get(entry).ok_or_else(|| {
        ElabError::new(
            ElabErrorKind::UnknownComponent(entry.into()),
            entry,
            Span::default(),
        )
    })?;
    let (args, _) = bind_named(&comp.sig, params)?;
    let mut e = Elab {
        prog,
        gen,
        opts,
        memo: BTreeMap::new(),
        names: BTreeSet::new(),
        stack: Vec::new(),
        out: Elaborated::default(),
    };
    let unit = e.instantiate(entry, &args, comp.sig.span)?;
    e.out.entry = unit.name;
    Ok(e.out)
}

impl Elab<'_> {
    fn fresh(&mut self, base: String) -> String {
        let mut name = base.clone();
        let mut n = 2;
        while self.names.contains(&name) {
            name = format!("{base}_v{n}");
            n += 1;
        }
        self.names.insert(name.clone());
        name
    }

    fn expand(&mut self, comp: &Component, args: &[u64], span: Span) -> Result<Unit, ElabError> {
        let sig = &comp.sig;
        let name_of = sig.name.as_str();
        match &sig.kind {
            SigKind::Source => {
                let name = self.fresh(mangle(name_of, args));
                let prog = self.prog;
                let ev = eval_component(prog, name_of, args, &name, self)?;
                self.out.units.push(ElabUnit {
                    comp: name_of.into(),
                    args: args.to_vec(),
                    name: name.clone(),
                    source: UnitSource::Evaluated,
                    outs: ev.outs.clone(),
                    injected: ev.injected,
                });
                self.out.components.push(ev.component);
                Ok(Unit {
                    name,
                    outs: ev.outs,
                })
            }
            SigKind::External => {
                if !sig.out_params.is_empty() {
                    return Err(ElabError::new(
                        ElabErrorKind::Gen(format!(
                            "external `{name_of}` has output parameters but no generator to bind them"
                        )),
                        name_of,
                        span,
                    ));
                }
                let binding = bind_params(sig, args)?;
                check_where(sig, &binding, span)?;
                let name = self.fresh(mangle(name_of, args));
                let decl = concrete_signature(sig, &binding, &name)?;
                self.out.units.push(ElabUnit {
                    comp: name_of.into(),
                    args: args.to_vec(),
                    name: name.clone(),
                    source: UnitSource::External,
                    outs: Binding::new(),
                    injected: Binding::new(),
                });
                self.out.externals.push(decl);
                Ok(Unit {
                    name,
                    outs: Binding::new(),
                })
            }
            SigKind::Generated { tool } => {
                let binding = bind_params(sig, args)?;
                check_where(sig, &binding, span)?;
                let import = self.prog.import(tool).ok_or_else(|| {
                    ElabError::new(
                        ElabErrorKind::Gen(format!("no import for tool `{tool}`")),
                        name_of,
                        span,
                    )
                })?;
                let params: Binding = sig
                    .params
                    .iter()
                    .map(|p| (p.name.clone(), binding[&p.name]))
                    .collect();
                let res = self.gen.generate(import, name_of, &params).map_err(|e| {
                    ElabError::new(ElabErrorKind::Gen(format!("{tool}.{name_of}: {e}")), name_of, span)
                })?;
                let decl = concretize_signature(sig, &params, &res.out_bindings, &res.module_name)?;
                if !self.names.insert(res.module_name.clone()) {
                    return Err(ElabError::new(
                        ElabErrorKind::Gen(format!(
                            "generated module name `{}` is already in use",
                            res.module_name
                        )),
                        name_of,
                        span,
                    ));
                }
                self.out.units.push(ElabUnit {
                    comp: format!("{tool}.{name_of}"),
                    args: args.to_vec(),
                    name: res.module_name.clone(),
                    source: UnitSource::Generated {
                        tool: tool.clone(),
                        verilog: res.verilog_path.clone(),
                    },
                    outs: res.out_bindings.clone(),
                    injected: Binding::new(),
                });
                self.out.externals.push(decl);
                Ok(Unit {
                    name: res.module_name,
                    outs: res.out_bindings,
                })
            }
        }
    }
}

impl Instantiate for Elab<'_> {
    fn instantiate(&mut self, comp: &str, args: &[u64], span: Span) -> Result<Unit, ElabError> {
        let c = self.prog.get(comp).ok_or_else(|| {
            ElabError::new(ElabErrorKind::UnknownComponent(comp.into()), comp, span)
        })?;
        let key = (comp.to_string(), args.to_vec());
        let share = self.opts.dedup || c.sig.is_external();
        if share {
            if let Some(u) = self.memo.get(&key) {
                return Ok(u.clone());
            }
        }
        let label = format!("{}[{}]", comp, {
            let a: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            a.join(", ")
        });
        if self.stack.len() >= self.opts.depth_limit {
            let mut e = ElabError::new(ElabErrorKind::DepthLimit(self.opts.depth_limit), comp, span);
            e.chain = self.stack.clone();
            e.chain.push(label);
            return Err(e);
        }
        self.stack.push(label);
        let res = self.expand(c, args, span);
        let res = res.map_err(|mut e| {
            if e.chain.is_empty() {
                e.chain = self.stack.clone();
            }
            e
        });
        self.stack.pop();
        let unit = res?;
        if share {
            self.memo.insert(key, unit.clone());
        }
        Ok(unit)
    }
}

/// The external declarations of `e`, one per line.
pub fn print_externals(e: &Elaborated) -> String {
    let mut out = String::new();
    for s in &e.externals {
        out.push_str(&print_signature(s));
        out.push_str(";\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::print_program;
    use crate::gen::{CacheKey, GenError, GenResult, NoTools};
    use crate::parse::parse;

    const SHIFT: &str = "\
        ext comp Reg[W]<'T:1>(in: ['T, 'T+1] W) -> (out: ['T+1, 'T+2] W);\n\
        comp Shift[W, N]<'G:1>(in: ['G, 'G+1] W) -> (out: ['G+N, 'G+N+1] W) where N > 0 {\n\
          bundle w[N+1]: for<i> ['G+i, 'G+i+1] W;\n\
          w[0] = in;\n\
          for i in 0..N { R := new Reg[W]; r := R<'G+i>(w[i]); w[i+1] = r.out; }\n\
          out = w[N];\n\
        }\n";

    struct FixedMul;

    impl Generator for FixedMul {
        fn generate(&mut self, import: &Import, module: &str, params: &Binding) -> Result<GenResult, GenError> {
            Ok(GenResult {
                verilog_path: format!("{module}.v"),
                module_name: format!("{module}_{}", params["W"]),
                out_bindings: [("L".to_string(), 3)].into_iter().collect(),
                stdout: "depth = 3\n".into(),
                stderr: String::new(),
                cache_key: CacheKey {
                    tool: import.alias.clone(),
                    module: module.into(),
                    params: params.iter().map(|(k, v)| (k.clone(), *v)).collect(),
                },
                cached: false,
            })
        }
    }

    fn muladd() -> Program {
        parse(&format!(
            "{SHIFT}import gen \"t.toml\" as tool;\n\
             gen tool comp Mul[W]<'G:1>(l: ['G, 'G+1] W, r: ['G, 'G+1] W) -> (o: ['G+L, 'G+L+1] W) \
             with {{ some L where L > 0; }};\n\
             ext comp Add[W]<'T:1>(l: ['T, 'T+1] W, r: ['T, 'T+1] W) -> (o: ['T, 'T+1] W);\n\
             comp MulAdd<'G:1>(l: ['G, 'G+1] 32, r: ['G, 'G+1] 32, c: ['G, 'G+1] 32) \
             -> (o: ['G+T, 'G+T+1] 32) with {{ some T; }} {{\n\
               S := new Shift[32, M::L]<'G>(c);\n\
               M := new Mul[32]<'G>(l, r);\n\
               A := new Add[32]<'G+M::L>(M.o, S.out);\n\
               o = A.o; T <- M::L; }}"
        ))
        .unwrap()
    }

    #[test]
    fn muladd_threads_latency() {
        let p = muladd();
        let e = elaborate(&p, "MulAdd", &Binding::new(), &mut FixedMul, Options::default()).unwrap();
        let m = e.manifest();
        assert!(m.contains("unit MulAdd = MulAdd[] evaluated\n  bind M::L = 3\n  out T = 3\n"), "{m}");
        assert!(m.contains("unit Shift_32_3 = Shift[32, 3] evaluated\n"), "{m}");
        let text = print_program(&e.program());
        assert!(text.contains("S := new Shift_32_3<'G>(c);"), "{text}");
        assert!(text.contains("A := new Add_32<'G+3>(M.o, S.out);"), "{text}");
        assert_eq!(e.entry, "MulAdd");
    }

    #[test]
    fn checking_needs_no_tools() {
        let p = muladd();
        let e = elaborate(&p, "MulAdd", &Binding::new(), &mut NoTools, Options::default()).unwrap_err();
        assert!(matches!(e.kind, ElabErrorKind::Gen(_)));
        assert_eq!(e.chain, ["MulAdd[]", "Mul[32]"]);
    }

    #[test]
    fn shift_register_counts() {
        let p = parse(SHIFT).unwrap();
        for n in [1u64, 4, 16] {
            let params = [("W".to_string(), 32), ("N".to_string(), n)].into_iter().collect();
            let e = elaborate(&p, "Shift", &params, &mut NoTools, Options::default()).unwrap();
            let body = e.components.last().unwrap().body.as_ref().unwrap();
            let regs = body
                .iter()
                .filter(|c| matches!(&c.kind, CommandKind::Instance { comp, .. } if comp == "Reg_32"))
                .count();
            assert_eq!(regs as u64, n);
            assert_eq!(e.externals.len(), 1);
        }
    }

    #[test]
    fn dedup_is_transparent() {
        let src = format!(
            "{SHIFT}comp Two<'G:1>(a: ['G, 'G+1] 8) -> () {{\n\
               X := new Shift[8, 2]<'G>(a); Y := new Shift[8, 2]<'G>(a); }}"
        );
        let p = parse(&src).unwrap();
        let shared = elaborate(&p, "Two", &Binding::new(), &mut NoTools, Options::default()).unwrap();
        let fresh = elaborate(
            &p,
            "Two",
            &Binding::new(),
            &mut NoTools,
            Options {
                dedup: false,
                ..Options::default()
            },
        )
        .unwrap();
        assert_eq!(shared.components.len(), 2);
        assert_eq!(fresh.components.len(), 3);
        let body = |c: &Component| {
            let mut c = c.clone();
            c.sig.name.clear();
            c
        };
        assert_eq!(body(&fresh.components[0]), body(&fresh.components[1]));
        assert_eq!(body(&shared.components[0]), body(&fresh.components[0]));
    }

    #[test]
    fn recursion_limit() {
        let p = parse("comp R[N]<'G:1>() -> () { X := new R[N+1]; }").unwrap();
        let params = [("N".to_string(), 0)].into_iter().collect();
        let e = elaborate(
            &p,
            "R",
            &params,
            &mut NoTools,
            Options {
                depth_limit: 5,
                dedup: true,
            },
        )
        .unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::DepthLimit(5));
        assert_eq!(e.chain.len(), 6);
        assert_eq!(e.chain[0], "R[0]");
    }

    #[test]
    fn cyclic_out_params_rejected() {
        let p = parse(
            "ext comp S[N]<'G:1>() -> () ;\n\
             comp C<'G:1>() -> () { A := new S[B::K]; B := new S[A::K]; }",
        )
        .unwrap();
        let e = elaborate(&p, "C", &Binding::new(), &mut NoTools, Options::default()).unwrap_err();
        assert!(matches!(e.kind, ElabErrorKind::Cycle(_)), "{e}");
        assert!(e.to_string().contains("A -> B -> A"), "{e}");
    }
}
