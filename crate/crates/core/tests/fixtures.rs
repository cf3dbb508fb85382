//! The committed edge lists must match what the generators produce today.
//! Regenerate the suite with `qaoa-ms gen --suite --out crates/core/fixtures/suite`.

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;

use qaoa_multistart::bench::suite_graphs;
use qaoa_multistart::graphs::{read_edge_list, write_edge_list, Edge};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn suite_fixtures_match_generators() {
    let dir = fixtures().join("suite");
    let suite = suite_graphs().unwrap();
    let on_disk = fs::read_dir(&dir).unwrap().count();
    assert_eq!(on_disk, suite.len(), "stray files in {}", dir.display());
    for named in &suite {
        let path = dir.join(format!("{}.edges", named.id));
        let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, write_edge_list(&named.graph), "{} is stale", path.display());
        let parsed = read_edge_list(&text).unwrap();
        assert_eq!(parsed, named.graph);
    }
}

#[test]
fn small_graph_set_is_every_connected_graph() {
    let text = fs::read_to_string(fixtures().join("connected_upto6.txt")).unwrap();
    let graphs: Vec<_> = text
        .split("\n\n")
        .skip(1)
        .map(|block| read_edge_list(block).unwrap())
        .collect();
    // connected graphs on 2..=6 unlabeled vertices: 1 + 2 + 6 + 21 + 112
    assert_eq!(graphs.len(), 142);
    let mut per_n = [0usize; 7];
    let mut seen = HashSet::new();
    for g in &graphs {
        assert!(g.is_connected(), "{}", g.label());
        per_n[g.n_vertices()] += 1;
        let edges: Vec<Edge> = g.edges().collect();
        assert!(seen.insert((g.n_vertices(), edges)), "duplicate {}", g.label());
    }
    assert_eq!(per_n, [0, 0, 1, 2, 6, 21, 112]);
}
