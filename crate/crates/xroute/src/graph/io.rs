use std::fmt::Write as _;

use super::{Graph, GraphError};

/// `n m` header then one `u v` line per edge copy, using 1-based slots.
///
/// Identifiers other than `slot + 1` go to the remap sidecar.
pub fn write_graph(g: &Graph) -> String {
    let mut s = String::new();
    let mut lines = Vec::new();
    for e in g.edges() {
        let (a, b) = (e.u + 1, e.v + 1);
        for _ in 0..e.mult {
            lines.push((a, b));
        }
    }
    lines.sort_unstable();
    writeln!(s, "{} {}", g.slots(), lines.len()).unwrap();
    for (a, b) in lines {
        writeln!(s, "{a} {b}").unwrap();
    }
    s
}

/// Reads the edge-list format; vertex ids are `1..=n` unless a remap is applied.
pub fn read_graph(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "missing header".into() })?;
    let nums = parse_pair(head, 1)?;
    let (n, m) = (nums.0 as usize, nums.1 as usize);
    let mut g = Graph::new_multigraph((1..=n as u64).collect())?;
    let mut count = 0;
    let mut multi = false;
    for (i, l) in lines {
        let (u, v) = parse_pair(l, i + 1)?;
        if u < 1 || v < 1 || u as usize > n || v as usize > n {
            return Err(GraphError::Parse { line: i + 1, msg: format!("vertex out of range in '{l}'") });
        }
        let (u, v) = (u as usize - 1, v as usize - 1);
        multi |= g.has_edge(u, v);
        g.add_edge(u, v).map_err(|e| GraphError::Parse { line: i + 1, msg: e.to_string() })?;
        count += 1;
    }
    if count != m {
        return Err(GraphError::Parse { line: 1, msg: format!("header says {m} edges, found {count}") });
    }
    if multi {
        Ok(g)
    } else {
        let mut s = Graph::new((1..=n as u64).collect())?;
        for e in g.edges() {
            s.add_edge(e.u, e.v)?;
        }
        Ok(s)
    }
}

fn parse_pair(l: &str, line: usize) -> Result<(u64, u64), GraphError> {
    let mut it = l.split_whitespace().map(|t| t.parse::<u64>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(GraphError::Parse { line, msg: format!("expected two integers, got '{l}'") }),
    }
}

/// `orig new` per line, in slot order.
pub fn write_remap(g: &Graph) -> String {
    let mut s = String::new();
    for (slot, &id) in g.ids().iter().enumerate() {
        writeln!(s, "{} {}", slot + 1, id).unwrap();
    }
    s
}

pub fn read_remap(g: &Graph, text: &str) -> Result<Graph, GraphError> {
    let mut ids = g.ids().to_vec();
    for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (o, n) = parse_pair(l, i + 1)?;
        if o < 1 || o as usize > ids.len() {
            return Err(GraphError::Parse { line: i + 1, msg: format!("unknown vertex {o}") });
        }
        ids[o as usize - 1] = n;
    }
    g.with_ids(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = Graph::cycle(5);
        let text = write_graph(&g);
        assert!(text.starts_with("5 5\n"));
        assert_eq!(read_graph(&text).unwrap(), g);
    }

    #[test]
    fn remap_round_trip() {
        let g = Graph::path(3).with_ids(vec![10, 30, 20]).unwrap();
        let r = read_remap(&Graph::path(3), &write_remap(&g)).unwrap();
        assert_eq!(r.ids(), &[10, 30, 20]);
    }

    #[test]
    fn parse_errors_name_lines() {
        assert!(matches!(read_graph("2 1\n1 3\n"), Err(GraphError::Parse { line: 2, .. })));
        assert!(matches!(read_graph("2 2\n1 2\n"), Err(GraphError::Parse { line: 1, .. })));
        assert!(matches!(read_graph("2 1\n1 1\n"), Err(GraphError::Parse { line: 2, .. })));
    }
}
