use super::*;
use crate::synthetic;
use proptest::prelude::*;

#[test]
fn minimal_function_has_four_nodes() {
    let ast = parse("int f(){return 0;}").unwrap();
    assert_eq!(ast.len(), 4);
    let mut kinds: Vec<_> = ast.kinds().collect();
    kinds.sort_by_key(|k| k.name());
    assert_eq!(
        kinds,
        vec![
            NodeKind::Compound,
            NodeKind::FunctionDecl,
            NodeKind::Literal,
            NodeKind::Return
        ]
    );
    let root = ast.node(ast.root);
    assert_eq!(root.kind, NodeKind::FunctionDecl);
    assert_eq!(root.label, "f");
    ast.validate().unwrap();
}

#[test]
fn even_check_has_if_inside_while() {
    let ast = parse(synthetic::EVEN_CHECK).unwrap();
    assert!(ast.has_nested(NodeKind::While, NodeKind::If));
    for kind in [
        NodeKind::FunctionDecl,
        NodeKind::ParmDecl,
        NodeKind::Compound,
        NodeKind::While,
        NodeKind::If,
        NodeKind::Return,
        NodeKind::BinaryOperator,
        NodeKind::UnaryOperator,
        NodeKind::DeclRef,
        NodeKind::Literal,
    ] {
        assert!(ast.kinds().any(|k| k == kind), "missing {kind}");
    }
}

#[test]
fn unbalanced_braces_fail_with_position() {
    let err = parse("int f(){").unwrap_err();
    assert_eq!(err.line, 1);
    assert!(err.message.contains("unbalanced"), "{err}");
}

#[test]
fn rejects_excluded_constructs() {
    for src in [
        "int f(int x){ switch(x){ case 1: return 1; } return 0; }",
        "int f(){ goto end; end: return 0; }",
        "int f(){ do { } while (1); return 0; }",
        "int f(int (*cb)(int)){ return 0; }",
        "#include <stdio.h>\nint f(){ return 0; }",
        "int f(){ return 0; } int g(){ return 1; }",
    ] {
        assert!(parse(src).is_err(), "accepted: {src}");
    }
}

#[test]
fn covers_required_constructs() {
    let src = r#"
        static struct node *find(struct node *head, const char *key, int n) {
            struct node *cur = head;
            int i, found = 0;
            unsigned long total[4] = {0, 1, 2, 3};
            for (i = 0; i < n && cur != NULL; i++) {
                if (strcmp(cur->name, key) == 0) { found = 1; break; }
                else if (cur->next == NULL) continue;
                cur = cur->next;
                total[i % 4] += (unsigned long) sizeof(struct node) * -i;
            }
            while (!found) found = i > 0 ? 1 : 0;
            printf("%d\n", found);
            return found ? cur : (struct node *) 0;
        }"#;
    let ast = parse(src).unwrap();
    ast.validate().unwrap();
    for kind in [
        NodeKind::For,
        NodeKind::Break,
        NodeKind::Continue,
        NodeKind::MemberExpr,
        NodeKind::ArraySubscript,
        NodeKind::Cast,
        NodeKind::SizeofType,
        NodeKind::Conditional,
        NodeKind::InitList,
        NodeKind::Call,
        NodeKind::VarDecl,
    ] {
        assert!(ast.kinds().any(|k| k == kind), "missing {kind}");
    }
    let reparsed = parse(&ast.to_source()).unwrap();
    assert!(ast.isomorphic(&reparsed), "{}", ast.to_source());
}

#[test]
fn statement_text() {
    let ast = parse("int f(int a){ int x = a + 1; x++; return x * 2; }").unwrap();
    let body = ast.node(*ast.node(ast.root).children.last().unwrap());
    let texts: Vec<String> = body.children.iter().map(|&c| ast.text_of(c)).collect();
    assert_eq!(texts, vec!["int x = a + 1;", "x++", "return x * 2;"]);
}

#[test]
fn comments_are_stripped_but_literals_kept() {
    let s = strip_comments("a /* x */ b // y\n\"/* not */\"");
    assert_eq!(s, "a   b \n\"/* not */\"");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_is_isomorphic(seed in any::<u64>()) {
        let src = synthetic::random_function(seed);
        let ast = parse(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        ast.validate().map_err(TestCaseError::fail)?;
        let printed = ast.to_source();
        let again = parse(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert!(ast.isomorphic(&again), "{}", printed);
        prop_assert_eq!(again.to_source(), printed);
    }
}
