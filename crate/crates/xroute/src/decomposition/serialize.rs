use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::build::finish;
use super::{Certification, DecompError, HierNode, Hierarchy, NodeKind, Part};
use crate::graph::{Embedding, Graph, GraphError};

fn ids(g: &Graph, vs: &[usize]) -> String {
    vs.iter().map(|&v| g.id(v).to_string()).collect::<Vec<_>>().join(" ")
}

fn write_emb(s: &mut String, tag: &str, g: &Graph, e: &Embedding) {
    for (&(u, v), p) in e.virtual_edges.iter().zip(&e.paths) {
        writeln!(s, "{tag} {} {} : {}", g.id(u), g.id(v), ids(g, p)).unwrap();
    }
}

/// One record per node; ids refer to the physical graph `g`.
pub fn write_hierarchy(h: &Hierarchy, g: &Graph) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "hierarchy n={} k={} eps={}/{} psi={} theta={} level_cap={} root={}",
        h.n, h.k, h.eps.0, h.eps.1, h.psi, h.leaf_threshold, h.level_cap, h.root
    )
    .unwrap();
    writeln!(s, "w {}", ids(g, &h.w)).unwrap();
    write_emb(&mut s, "rootmatch", g, &h.root_matching_embedding);
    for (label, rounds) in &h.oracle_charges {
        writeln!(s, "charge {label} {rounds}").unwrap();
    }
    for nd in &h.nodes {
        let cert = match &nd.certification {
            None => "-".to_string(),
            Some(Certification::Root) => "root".into(),
            Some(Certification::Trivial) => "trivial".into(),
            Some(Certification::Exact(r)) => format!("exact:{r}"),
            Some(Certification::Estimated(f)) => format!("est:{f:?}"),
        };
        let parent = nd.parent.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        writeln!(s, "node {} kind={} level={} parent={} cert={}", nd.id, nd.kind.label(), nd.level, parent, cert).unwrap();
        writeln!(s, "vertices {}", ids(g, &nd.vertices)).unwrap();
        let parts: Vec<String> = nd.parts.iter().map(|p| format!("{}:{}", p.good, p.bad)).collect();
        writeln!(s, "parts {}", parts.join(" ")).unwrap();
        for (i, p) in nd.parts.iter().enumerate() {
            let pairs: Vec<String> = p.matching.iter().map(|&(a, b)| format!("{}-{}", g.id(a), g.id(b))).collect();
            writeln!(s, "match {i} {}", pairs.join(" ")).unwrap();
        }
        if let Some(hx) = &nd.virtual_graph {
            writeln!(s, "multigraph {}", hx.is_multigraph()).unwrap();
            for e in hx.edges() {
                writeln!(s, "hedge {} {} {}", g.id(e.u), g.id(e.v), e.mult).unwrap();
            }
        }
        if let Some(e) = &nd.embedding {
            write_emb(&mut s, "f", g, e);
        }
        if let Some(e) = &nd.matching_embedding {
            write_emb(&mut s, "fm", g, e);
        }
        writeln!(s, "end").unwrap();
    }
    s
}

fn perr(line: usize, msg: impl Into<String>) -> DecompError {
    DecompError::Graph(GraphError::Parse { line, msg: msg.into() })
}

fn kv<'a>(tok: &'a str, key: &str, line: usize) -> Result<&'a str, DecompError> {
    tok.strip_prefix(key).and_then(|t| t.strip_prefix('=')).ok_or_else(|| perr(line, format!("expected {key}=")))
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, DecompError> {
    s.parse().map_err(|_| perr(line, format!("bad number '{s}'")))
}

fn rational(s: &str, line: usize) -> Result<BigRational, DecompError> {
    match s.split_once('/') {
        Some((a, b)) => Ok(BigRational::new(num::<BigInt>(a, line)?, num::<BigInt>(b, line)?)),
        None => Ok(BigRational::from_integer(num::<BigInt>(s, line)?)),
    }
}

struct Reader<'a> {
    g: &'a Graph,
}

impl Reader<'_> {
    fn slot(&self, id: &str, line: usize) -> Result<usize, DecompError> {
        let id: u64 = num(id, line)?;
        self.g.slot_of(id).ok_or_else(|| perr(line, format!("unknown id {id}")))
    }

    fn slots(&self, toks: &[&str], line: usize) -> Result<Vec<usize>, DecompError> {
        toks.iter().map(|t| self.slot(t, line)).collect()
    }

    fn emb_entry(&self, toks: &[&str], line: usize) -> Result<((usize, usize), Vec<usize>), DecompError> {
        if toks.len() < 4 || toks[2] != ":" {
            return Err(perr(line, "malformed embedding entry"));
        }
        let e = (self.slot(toks[0], line)?, self.slot(toks[1], line)?);
        Ok((e, self.slots(&toks[3..], line)?))
    }
}

pub fn read_hierarchy(text: &str, g: &Graph) -> Result<Hierarchy, DecompError> {
    let rd = Reader { g };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, head) = lines.next().ok_or_else(|| perr(1, "empty"))?;
    let t: Vec<&str> = head.split_whitespace().collect();
    if t.len() != 8 || t[0] != "hierarchy" {
        return Err(perr(ln, "bad header"));
    }
    let n: usize = num(kv(t[1], "n", ln)?, ln)?;
    let k: u64 = num(kv(t[2], "k", ln)?, ln)?;
    let eps = kv(t[3], "eps", ln)?.split_once('/').ok_or_else(|| perr(ln, "eps"))?;
    let eps = (num(eps.0, ln)?, num(eps.1, ln)?);
    let psi = rational(kv(t[4], "psi", ln)?, ln)?;
    let theta: usize = num(kv(t[5], "theta", ln)?, ln)?;
    let level_cap: u32 = num(kv(t[6], "level_cap", ln)?, ln)?;
    let root: usize = num(kv(t[7], "root", ln)?, ln)?;
    let mut w = Vec::new();
    let mut rm_edges = Vec::new();
    let mut rm_paths = Vec::new();
    let mut charges = Vec::new();
    let mut nodes: Vec<HierNode> = Vec::new();
    let mut cur: Option<HierNode> = None;
    let mut hedges: Vec<(usize, usize, u32)> = Vec::new();
    let mut multi = false;
    let mut has_h = false;
    let mut f: (Vec<(usize, usize)>, Vec<Vec<usize>>, bool) = (vec![], vec![], false);
    let mut fm: (Vec<(usize, usize)>, Vec<Vec<usize>>, bool) = (vec![], vec![], false);
    for (ln, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let Some(&tag) = toks.first() else { continue };
        let rest = &toks[1..];
        match tag {
            "w" => w = rd.slots(rest, ln)?,
            "rootmatch" => {
                let (e, p) = rd.emb_entry(rest, ln)?;
                rm_edges.push(e);
                rm_paths.push(p);
            }
            "charge" if rest.len() == 2 => charges.push((rest[0].to_string(), num(rest[1], ln)?)),
            "node" if rest.len() == 5 => {
                let id: usize = num(rest[0], ln)?;
                let kind = match kv(rest[1], "kind", ln)? {
                    "good-internal" => NodeKind::GoodInternal,
                    "good-terminal" => NodeKind::GoodTerminal,
                    "bad" => NodeKind::Bad,
                    other => return Err(perr(ln, format!("kind {other}"))),
                };
                let level = num(kv(rest[2], "level", ln)?, ln)?;
                let parent = match kv(rest[3], "parent", ln)? {
                    "-" => None,
                    p => Some(num(p, ln)?),
                };
                let c = kv(rest[4], "cert", ln)?;
                let certification = match c {
                    "-" => None,
                    "root" => Some(Certification::Root),
                    "trivial" => Some(Certification::Trivial),
                    _ if c.starts_with("exact:") => Some(Certification::Exact(rational(&c[6..], ln)?)),
                    _ if c.starts_with("est:") => Some(Certification::Estimated(num(&c[4..], ln)?)),
                    _ => return Err(perr(ln, "cert")),
                };
                if id != nodes.len() {
                    return Err(perr(ln, "node ids must be consecutive"));
                }
                cur = Some(HierNode {
                    id,
                    kind,
                    level,
                    parent,
                    vertices: vec![],
                    parts: vec![],
                    virtual_graph: None,
                    embedding: None,
                    matching_embedding: None,
                    flat: None,
                    flat_matching: None,
                    best: vec![],
                    part_best_counts: vec![],
                    certification,
                });
                hedges.clear();
                has_h = false;
                f = (vec![], vec![], false);
                fm = (vec![], vec![], false);
            }
            "vertices" => cur.as_mut().ok_or_else(|| perr(ln, "no node"))?.vertices = rd.slots(rest, ln)?,
            "parts" => {
                let nd = cur.as_mut().ok_or_else(|| perr(ln, "no node"))?;
                for p in rest {
                    let (a, b) = p.split_once(':').ok_or_else(|| perr(ln, "part"))?;
                    nd.parts.push(Part { good: num(a, ln)?, bad: num(b, ln)?, matching: vec![] });
                }
            }
            "match" => {
                let nd = cur.as_mut().ok_or_else(|| perr(ln, "no node"))?;
                let i: usize = num(rest.first().ok_or_else(|| perr(ln, "match"))?, ln)?;
                for pr in &rest[1..] {
                    let (a, b) = pr.split_once('-').ok_or_else(|| perr(ln, "pair"))?;
                    let pair = (rd.slot(a, ln)?, rd.slot(b, ln)?);
                    nd.parts.get_mut(i).ok_or_else(|| perr(ln, "part index"))?.matching.push(pair);
                }
            }
            "multigraph" => {
                multi = rest.first() == Some(&"true");
                has_h = true;
            }
            "hedge" if rest.len() == 3 => hedges.push((rd.slot(rest[0], ln)?, rd.slot(rest[1], ln)?, num(rest[2], ln)?)),
            "f" => {
                let (e, p) = rd.emb_entry(rest, ln)?;
                f.0.push(e);
                f.1.push(p);
                f.2 = true;
            }
            "fm" => {
                let (e, p) = rd.emb_entry(rest, ln)?;
                fm.0.push(e);
                fm.1.push(p);
                fm.2 = true;
            }
            "end" => {
                let mut nd = cur.take().ok_or_else(|| perr(ln, "end without node"))?;
                if has_h {
                    let mut hx = g.empty_like(&nd.vertices, multi);
                    for &(u, v, m) in &hedges {
                        hx.add_edge_mult(u, v, m)?;
                    }
                    nd.virtual_graph = Some(hx);
                }
                if nd.kind.is_good() {
                    nd.embedding = Some(Embedding::new(std::mem::take(&mut f.0), std::mem::take(&mut f.1))?);
                    nd.matching_embedding = Some(Embedding::new(std::mem::take(&mut fm.0), std::mem::take(&mut fm.1))?);
                }
                nodes.push(nd);
            }
            _ => return Err(perr(ln, format!("unexpected record '{tag}'"))),
        }
    }
    let rme = Embedding::new(rm_edges.clone(), rm_paths)?;
    let mut h = Hierarchy {
        nodes,
        root,
        k,
        eps,
        psi,
        rho_best: BigRational::from_integer(BigInt::from(1)),
        leaf_threshold: theta,
        level_cap,
        w,
        root_matching: rm_edges,
        root_matching_embedding: rme,
        n,
        oracle_charges: charges,
    };
    finish(&mut h)?;
    Ok(h)
}
