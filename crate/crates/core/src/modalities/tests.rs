use proptest::prelude::*;

use super::*;
use crate::frontend::parse;
use crate::synthetic::{random_function, EVEN_CHECK};

fn cfg_of(src: &str) -> Cfg {
    simplify_cfg(&build_cfg(&parse(src).unwrap()).unwrap()).unwrap()
}

fn edge_set(cfg: &Cfg) -> Vec<(String, String, EdgeType)> {
    let name = |v: usize| match v {
        _ if v == cfg.entry => "<entry>".to_string(),
        _ if v == cfg.exit => "<exit>".to_string(),
        _ => cfg.vertices[v].text.clone(),
    };
    let mut out: Vec<_> = cfg
        .edges
        .iter()
        .map(|e| (name(e.source), name(e.target), e.edge_type))
        .collect();
    out.sort();
    out
}

fn owned(edges: &[(&str, &str, EdgeType)]) -> Vec<(String, String, EdgeType)> {
    let mut out: Vec<_> = edges
        .iter()
        .map(|(a, b, t)| (a.to_string(), b.to_string(), *t))
        .collect();
    out.sort();
    out
}

#[test]
fn while_loop_matches_hand_drawn_graph() {
    let cfg = cfg_of("void f() { while (c) { s; } }");
    assert_eq!(cfg.len(), 4);
    let kinds: Vec<_> = cfg.vertices.iter().map(|v| v.kind).collect();
    assert!(kinds.contains(&StatementKind::LoopCond));
    assert_eq!(
        edge_set(&cfg),
        owned(&[
            ("<entry>", "c", EdgeType::Seq),
            ("c", "s;", EdgeType::BranchTrue),
            ("s;", "c", EdgeType::LoopBack),
            ("c", "<exit>", EdgeType::BranchFalse),
        ])
    );
}

#[test]
fn straight_line_code_is_a_chain() {
    let cfg = cfg_of("void f() { a; b; }");
    assert_eq!(
        edge_set(&cfg),
        owned(&[
            ("<entry>", "a;", EdgeType::Seq),
            ("a;", "b;", EdgeType::Seq),
            ("b;", "<exit>", EdgeType::Seq),
        ])
    );
}

#[test]
fn even_check_graph() {
    let cfg = cfg_of(EVEN_CHECK);
    assert!(cfg.has_cycle());
    assert_eq!(
        edge_set(&cfg),
        owned(&[
            ("<entry>", "int i = 0;", EdgeType::Seq),
            ("int i = 0;", "i < n", EdgeType::Seq),
            ("i < n", "(array[i] % 2) != 0", EdgeType::BranchTrue),
            ("i < n", "return 1;", EdgeType::BranchFalse),
            ("(array[i] % 2) != 0", "return 0;", EdgeType::BranchTrue),
            ("(array[i] % 2) != 0", "i++;", EdgeType::BranchFalse),
            ("i++;", "i < n", EdgeType::LoopBack),
            ("return 0;", "<exit>", EdgeType::Seq),
            ("return 1;", "<exit>", EdgeType::Seq),
        ])
    );
    let kind = |t: &str| cfg.vertices[cfg.find(t).unwrap()].kind;
    assert_eq!(kind("i < n"), StatementKind::LoopCond);
    assert_eq!(kind("(array[i] % 2) != 0"), StatementKind::BranchCond);
    assert_eq!(kind("int i = 0;"), StatementKind::Decl);
    assert_eq!(kind("i++;"), StatementKind::Assign);
    assert_eq!(kind("return 0;"), StatementKind::Return);
}

#[test]
fn for_loop_continue_goes_to_step() {
    let cfg = cfg_of("void f(int n) { for (int i = 0; i < n; i++) { if (i) continue; g(i); } }");
    let step = cfg.find("i++;").unwrap();
    let cond = cfg.find("i").unwrap();
    assert!(cfg.has_edge(cond, step, EdgeType::BranchTrue));
    assert!(cfg.has_edge(step, cfg.find("i < n").unwrap(), EdgeType::LoopBack));
    assert_eq!(
        cfg.vertices[cfg.find("g(i);").unwrap()].kind,
        StatementKind::Call
    );
}

#[test]
fn break_leaves_the_loop() {
    let cfg = cfg_of("int f(int n) { while (1) { if (n) break; n++; } return n; }");
    let cond = cfg.find("n").unwrap();
    assert!(cfg.has_edge(cond, cfg.find("return n;").unwrap(), EdgeType::BranchTrue));
}

#[test]
fn code_after_return_is_dropped() {
    let cfg = cfg_of("int f() { return 1; x = 2; }");
    assert_eq!(cfg.find("x = 2;"), None);
    cfg.validate().unwrap();
}

fn vertex(id: usize, kind: StatementKind, text: &str) -> CfgVertex {
    CfgVertex {
        id,
        kind,
        text: text.to_string(),
    }
}

fn edge(source: usize, target: usize, edge_type: EdgeType) -> CfgEdge {
    CfgEdge {
        source,
        target,
        edge_type,
    }
}

#[test]
fn empty_vertex_is_bypassed_with_incoming_type() {
    let cfg = Cfg {
        vertices: vec![
            vertex(0, StatementKind::Entry, ""),
            vertex(1, StatementKind::Exit, ""),
            vertex(2, StatementKind::BranchCond, "a"),
            vertex(3, StatementKind::Assign, ""),
            vertex(4, StatementKind::Assign, "b;"),
        ],
        edges: vec![
            edge(0, 2, EdgeType::Seq),
            edge(2, 3, EdgeType::BranchTrue),
            edge(3, 4, EdgeType::Seq),
            edge(2, 4, EdgeType::BranchFalse),
            edge(4, 1, EdgeType::Seq),
        ],
        entry: 0,
        exit: 1,
    };
    let s = simplify_cfg(&cfg).unwrap();
    assert_eq!(s.len(), 4);
    let a = s.find("a").unwrap();
    let b = s.find("b;").unwrap();
    assert!(s.has_edge(a, b, EdgeType::BranchTrue));
    assert!(s.has_edge(a, b, EdgeType::BranchFalse));
    s.validate().unwrap();
}

#[test]
fn duplicate_statements_merge_into_first() {
    let cfg = Cfg {
        vertices: vec![
            vertex(0, StatementKind::Entry, ""),
            vertex(1, StatementKind::Exit, ""),
            vertex(2, StatementKind::Assign, "i++;"),
            vertex(3, StatementKind::Assign, "x = 1;"),
            vertex(4, StatementKind::Assign, "i++;"),
            vertex(5, StatementKind::Call, "g();"),
        ],
        edges: vec![
            edge(0, 2, EdgeType::Seq),
            edge(2, 3, EdgeType::Seq),
            edge(3, 4, EdgeType::Seq),
            edge(4, 5, EdgeType::Seq),
            edge(5, 1, EdgeType::Seq),
        ],
        entry: 0,
        exit: 1,
    };
    let s = simplify_cfg(&cfg).unwrap();
    assert_eq!(s.len(), 5);
    let inc = s.find("i++;").unwrap();
    assert_eq!(inc, 2);
    assert!(s.has_edge(inc, s.find("g();").unwrap(), EdgeType::Seq));
    assert!(s.has_edge(s.find("x = 1;").unwrap(), inc, EdgeType::Seq));
    s.validate().unwrap();
}

#[test]
fn oversized_graph_is_rejected() {
    let mut vertices = vec![
        vertex(0, StatementKind::Entry, ""),
        vertex(1, StatementKind::Exit, ""),
    ];
    let mut edges = Vec::new();
    let mut prev = 0;
    for i in 0..518 {
        let id = vertices.len();
        vertices.push(vertex(id, StatementKind::Assign, &format!("x{i} = {i};")));
        edges.push(edge(prev, id, EdgeType::Seq));
        prev = id;
    }
    edges.push(edge(prev, 1, EdgeType::Seq));
    let cfg = Cfg {
        vertices,
        edges,
        entry: 0,
        exit: 1,
    };
    assert_eq!(cfg.len(), 520);
    assert_eq!(
        simplify_cfg(&cfg),
        Err(ModalityError::TooLarge { vertices: 520 })
    );
}

#[test]
fn edge_types_mirror() {
    for t in EdgeType::ALL {
        assert_ne!(t, t.reverse());
        assert_eq!(t.reverse().reverse(), t);
        assert_ne!(t.is_reverse(), t.reverse().is_reverse());
    }
    assert_eq!(
        serde_json::to_string(&EdgeType::LoopBackRev).unwrap(),
        "\"loop-back-rev\""
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn binarized_trees_have_arity_zero_or_two(seed in any::<u64>()) {
        let raw = parse(&random_function(seed)).unwrap();
        let b = binarize(&raw);
        b.validate().unwrap();
        prop_assert!(b.nodes.iter().all(|n| n.arity() != 1 && n.arity() <= 2));
    }

    #[test]
    fn binarization_keeps_the_leaf_fringe(seed in any::<u64>()) {
        let raw = parse(&random_function(seed)).unwrap();
        let b = binarize(&raw);
        let before = raw.leaf_labels();
        let after = b.leaf_labels();
        prop_assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            prop_assert!(
                x == y || y.ends_with(&format!("{MERGE_SEPARATOR}{x}")),
                "{} vs {}", x, y
            );
        }
    }

    #[test]
    fn built_graphs_are_well_formed(seed in any::<u64>()) {
        let cfg = build_cfg(&parse(&random_function(seed)).unwrap()).unwrap();
        prop_assert!(cfg.reachable().iter().enumerate().all(|(v, &r)| r || v == cfg.exit));
        for v in &cfg.vertices {
            if v.id == cfg.exit {
                continue;
            }
            let out = cfg.out_degree(v.id);
            match v.kind {
                StatementKind::BranchCond | StatementKind::LoopCond => prop_assert_eq!(out, 2),
                _ => prop_assert!(out >= 1),
            }
        }
    }

    #[test]
    fn simplification_is_idempotent_and_shrinking(seed in any::<u64>()) {
        let cfg = build_cfg(&parse(&random_function(seed)).unwrap()).unwrap();
        let once = simplify_cfg(&cfg).unwrap();
        once.validate().unwrap();
        prop_assert!(once.len() <= cfg.len());
        prop_assert!(once.edges.len() <= cfg.edges.len());
        prop_assert_eq!(simplify_cfg(&once).unwrap(), once);
    }
}
