// SPDX-License-Identifier: Apache-2.0

//! Dependency order of the commands in one block.
//!
//! A command that reads `X::P`, a `let`, an invocation output or a bundle
//! must come after the command defining it. Independent commands keep their
//! source order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ir::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleError {
    /// Names along the cycle, first name repeated at the end.
    pub names: Vec<String>,
    pub span: Span,
}

impl fmt::Display for CycleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cyclic output-parameter dependency: {}", self.names.join(" -> "))
    }
}

impl core::error::Error for CycleError {}

fn def_key(cmd: &Command) -> Option<String> {
    match &cmd.kind {
        CommandKind::Instance { name, .. } => Some(format!("inst:{name}")),
        CommandKind::Invoke { name, .. } => Some(format!("inv:{name}")),
        CommandKind::Let { name, .. } => Some(format!("val:{name}")),
        CommandKind::Bundle(def) => Some(format!("wire:{}", def.name)),
        _ => None,
    }
}

fn display_name(key: &str) -> &str {
    key.split_once(':').map_or(key, |(_, n)| n)
}

fn collect_uses(cmd: &Command, out: &mut BTreeSet<String>) {
    cmd.for_each_expr(&mut |e| {
        for v in e.free_vars() {
            match v.split_once("::") {
                Some((inst, _)) => out.insert(format!("inst:{inst}")),
                None => out.insert(format!("val:{v}")),
            };
        }
    });
    let mut port = |r: &PortRef| match r {
        PortRef::Local { port, .. } => {
            out.insert(format!("wire:{port}"));
        }
        PortRef::InvocOut { invoc, .. } => {
            out.insert(format!("inv:{invoc}"));
        }
        PortRef::Const(_) => {}
    };
    match &cmd.kind {
        CommandKind::Invoke { inst, args, .. } => {
            args.iter().for_each(&mut port);
            out.insert(format!("inst:{inst}"));
        }
        CommandKind::Connect { dst, src } => {
            port(dst);
            port(src);
        }
        _ => {}
    }
    for child in cmd.children() {
        collect_uses(child, out);
    }
}

/// An invocation may feed its own output back (a register loop), and an
/// instance's availability may mention its own output parameters.
fn self_use_allowed(cmd: &Command) -> bool {
    match &cmd.kind {
        CommandKind::Invoke { .. } => true,
        CommandKind::Instance { name, args, .. } => !args
            .iter()
            .flat_map(|a| a.free_vars())
            .any(|v| v.split_once("::").is_some_and(|(i, _)| i == name)),
        _ => false,
    }
}

/// Indices of `cmds` in dependency order.
pub fn topo_order(cmds: &[Command]) -> Result<Vec<usize>, CycleError> {
    let defs: BTreeMap<String, usize> = cmds
        .iter()
        .enumerate()
        .filter_map(|(i, c)| def_key(c).map(|k| (k, i)))
        .collect();
    let deps: Vec<BTreeSet<usize>> = cmds
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut uses = BTreeSet::new();
            collect_uses(c, &mut uses);
            uses.iter()
                .filter_map(|u| defs.get(u).copied())
                .filter(|&d| d != i || !self_use_allowed(&cmds[i]))
                .collect()
        })
        .collect();
    let mut done = alloc::vec![false; cmds.len()];
    let mut order = Vec::with_capacity(cmds.len());
    while order.len() < cmds.len() {
        let next = (0..cmds.len()).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
        match next {
            Some(i) => {
                done[i] = true;
                order.push(i);
            }
            None => {
                let start = (0..cmds.len()).find(|&i| !done[i]).unwrap_or(0);
                let mut path = alloc::vec![start];
                let mut cur = start;
                loop {
                    let nxt = deps[cur]
                        .iter()
                        .copied()
                        .find(|&d| !done[d])
                        .unwrap_or(cur);
                    if let Some(pos) = path.iter().position(|&p| p == nxt) {
                        let mut cycle: Vec<usize> = path[pos..].to_vec();
                        cycle.push(nxt);
                        let names = cycle
                            .iter()
                            .map(|&i| {
                                def_key(&cmds[i])
                                    .map(|k| String::from(display_name(&k)))
                                    .unwrap_or_default()
                            })
                            .collect();
                        return Err(CycleError {
                            names,
                            span: cmds[nxt].span,
                        });
                    }
                    path.push(nxt);
                    cur = nxt;
                }
            }
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    fn body(src: &str) -> Vec<Command> {
        let p = parse(src).unwrap();
        p.components.last().unwrap().body.clone().unwrap()
    }

    const EXTS: &str = "ext comp M<'G:1>(a: ['G, 'G+1] 8) -> (o: ['G+L, 'G+L+1] 8) with { some L; };\n\
                        ext comp S[N]<'G:1>(a: ['G, 'G+1] 8) -> (o: ['G+N, 'G+N+1] 8) with { some K; };\n";

    #[test]
    fn producer_first() {
        let cmds = body(&format!(
            "{EXTS}comp C<'G:1>(x: ['G, 'G+1] 8) -> () {{ S0 := new S[M0::L]; M0 := new M; }}"
        ));
        assert_eq!(topo_order(&cmds).unwrap(), [1, 0]);
    }

    #[test]
    fn independent_keep_source_order() {
        let cmds = body(&format!(
            "{EXTS}comp C<'G:1>() -> () {{ A := new M; B := new M; }}"
        ));
        assert_eq!(topo_order(&cmds).unwrap(), [0, 1]);
    }

    #[test]
    fn two_cycle_reported() {
        let cmds = body(&format!(
            "{EXTS}comp C<'G:1>() -> () {{ A := new S[B::K]; B := new S[A::K]; }}"
        ));
        let err = topo_order(&cmds).unwrap_err();
        assert_eq!(err.names, ["A", "B", "A"]);
    }

    #[test]
    fn combined_form_is_not_a_self_cycle() {
        let cmds = body(&format!(
            "{EXTS}comp C<'G:1>(x: ['G, 'G+1] 8) -> () {{ m := new M<'G>(x); s := new S[m::L]<'G>(m.o); }}"
        ));
        assert_eq!(topo_order(&cmds).unwrap(), [0, 1, 2, 3]);
    }

    #[test]
    fn availability_may_use_own_outputs() {
        let cmds = body(&format!(
            "{EXTS}comp C<'G:1>() -> () {{ A := new M in ['G, 'G+A::L+1]; }}"
        ));
        assert_eq!(topo_order(&cmds).unwrap(), [0]);
        let cmds = body(&format!("{EXTS}comp C<'G:1>() -> () {{ A := new S[A::K]; }}"));
        assert_eq!(topo_order(&cmds).unwrap_err().names, ["A", "A"]);
    }
}
