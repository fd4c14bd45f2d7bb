//! Plain-text edge lists: one whitespace-separated pair of node ids per line,
//! `#` starts a comment. A `# nodes N` comment fixes the node count so that
//! trailing isolated nodes survive a round trip; otherwise `n` is one past the
//! largest id seen.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Graph, GraphError};

pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut declared_n = None;
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut max_id = None::<usize>;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let (body, comment) = match raw.split_once('#') {
            Some((b, c)) => (b, Some(c)),
            None => (raw, None),
        };
        if let Some(c) = comment {
            let mut words = c.split_whitespace();
            if words.next() == Some("nodes") {
                let n = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| GraphError::Parse {
                        line,
                        message: "malformed `# nodes N` header".into(),
                    })?;
                declared_n = Some(n);
            }
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [a, b] => {
                let parse = |s: &str| {
                    s.parse::<usize>().map_err(|e| GraphError::Parse {
                        line,
                        message: format!("bad node id {s:?}: {e}"),
                    })
                };
                let (u, v) = (parse(a)?, parse(b)?);
                if u == v {
                    return Err(GraphError::SelfLoop { node: u, line });
                }
                let k = (u.min(v), u.max(v));
                if !seen.insert(k) {
                    return Err(GraphError::DuplicateEdge { u: k.0, v: k.1, line });
                }
                max_id = Some(max_id.map_or(k.1, |m| m.max(k.1)));
                edges.push(k);
            }
            _ => {
                return Err(GraphError::Parse {
                    line,
                    message: format!("expected two node ids, found {} fields", fields.len()),
                })
            }
        }
    }
    let implied = max_id.map_or(0, |m| m + 1);
    let n = match declared_n {
        Some(n) if n < implied => return Err(GraphError::NodeOutOfRange { node: implied - 1, n }),
        Some(n) => n,
        None => implied,
    };
    Ok(Graph::from_edges_erased(n, edges))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph, GraphError> {
    parse_edge_list(&fs::read_to_string(path)?)
}

pub fn write_edge_list(g: &Graph, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# nodes {}", g.n())?;
    for &(u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let mut buf = Vec::new();
    write_edge_list(g, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphModel};
    use proptest::prelude::*;

    #[test]
    fn parses_path() {
        let g = parse_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g, generate(&GraphModel::Path, 3, 0).unwrap());
    }

    #[test]
    fn comments_and_blank_lines() {
        let g = parse_edge_list("# a triangle\n\n0 1 # first\n1 2\n2 0\n").unwrap();
        assert_eq!(g.num_edges(), 3);
    }

    #[test]
    fn self_loop_reported_with_line() {
        assert!(matches!(
            parse_edge_list("0 0"),
            Err(GraphError::SelfLoop { node: 0, line: 1 })
        ));
    }

    #[test]
    fn duplicate_reported_with_line() {
        assert!(matches!(
            parse_edge_list("0 1\n2 1\n1 0"),
            Err(GraphError::DuplicateEdge { u: 0, v: 1, line: 3 })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_edge_list("0 1\n0 x"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 2"),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k4.txt");
        let g = generate(&GraphModel::Complete, 4, 0).unwrap();
        save_edge_list(&g, &path).unwrap();
        assert_eq!(load_edge_list(&path).unwrap(), g);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(n in 1usize..40, p in 0.0f64..1.0, seed in any::<u64>()) {
            let g = generate(&GraphModel::ErGnp { p }, n, seed).unwrap();
            let mut buf = Vec::new();
            write_edge_list(&g, &mut buf).unwrap();
            let back = parse_edge_list(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
