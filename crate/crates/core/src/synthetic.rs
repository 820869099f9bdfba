//! Generated C snippets: a templated retrieval corpus and random functions
//! for exercising the frontend.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::CorpusRecord;

/// Small loop-with-branch function in the style of an "all elements even" check.
pub const EVEN_CHECK: &str = r#"int check(int *array, int n) {
    int i = 0;
    while (i < n) {
        if (array[i] % 2 != 0) {
            return 0;
        }
        i++;
    }
    return 1;
}"#;

pub const EVEN_CHECK_COMMENT: &str = "/** Verify an array has even numbers */";

const SUBJECTS: [&str; 8] = [
    "scores", "prices", "weights", "counts", "ages", "heights", "votes", "pixels",
];

/// (name prefix, description template, code template); `{s}` is the subject.
const TEMPLATES: [(&str, &str, &str); 8] = [
    (
        "sum",
        "compute the sum of all {s}",
        "int sum_{s}(int *{s}, int n) {\n    int total = 0;\n    for (int i = 0; i < n; i++) {\n        total += {s}[i];\n    }\n    return total;\n}",
    ),
    (
        "max",
        "find the largest value among the {s}",
        "int max_{s}(int *{s}, int n) {\n    int best = {s}[0];\n    for (int i = 1; i < n; i++) {\n        if ({s}[i] > best) {\n            best = {s}[i];\n        }\n    }\n    return best;\n}",
    ),
    (
        "min",
        "find the smallest value among the {s}",
        "int min_{s}(int *{s}, int n) {\n    int least = {s}[0];\n    int i = 1;\n    while (i < n) {\n        if ({s}[i] < least) {\n            least = {s}[i];\n        }\n        i++;\n    }\n    return least;\n}",
    ),
    (
        "count_even",
        "count how many {s} are even",
        "int count_even_{s}(int *{s}, int n) {\n    int count = 0;\n    int i = 0;\n    while (i < n) {\n        if ({s}[i] % 2 == 0) {\n            count++;\n        }\n        i++;\n    }\n    return count;\n}",
    ),
    (
        "all_positive",
        "check whether every one of the {s} is positive",
        "int all_positive_{s}(int *{s}, int n) {\n    for (int i = 0; i < n; i++) {\n        if ({s}[i] <= 0) {\n            return 0;\n        }\n    }\n    return 1;\n}",
    ),
    (
        "reverse",
        "reverse the order of the {s} in place",
        "void reverse_{s}(int *{s}, int n) {\n    int lo = 0;\n    int hi = n - 1;\n    while (lo < hi) {\n        int tmp = {s}[lo];\n        {s}[lo] = {s}[hi];\n        {s}[hi] = tmp;\n        lo++;\n        hi--;\n    }\n}",
    ),
    (
        "print",
        "print each of the {s} to standard output",
        "void print_{s}(int *{s}, int n) {\n    for (int i = 0; i < n; i++) {\n        printf(\"%d\\n\", {s}[i]);\n    }\n}",
    ),
    (
        "find",
        "return the position of a target within the {s}",
        "int find_{s}(int *{s}, int n, int target) {\n    for (int i = 0; i < n; i++) {\n        if ({s}[i] == target) {\n            return i;\n        }\n    }\n    return -1;\n}",
    ),
];

/// 64 snippet/description pairs: eight operations over eight array subjects.
/// Every description is distinct and ids are zero-padded so that lexical
/// order matches generation order.
pub fn templated_corpus() -> Vec<CorpusRecord> {
    let mut out = Vec::with_capacity(64);
    for (prefix, desc, code) in TEMPLATES {
        for subject in SUBJECTS {
            out.push(CorpusRecord {
                id: format!("{:03}_{prefix}_{subject}", out.len()),
                code: code.replace("{s}", subject),
                description: format!("/** {} */", desc.replace("{s}", subject)),
            });
        }
    }
    out
}

/// `n` random functions with short generated descriptions.
pub fn random_corpus(n: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let code = random_function(rng.gen());
            let words = ["update", "scan", "check", "merge", "count", "filter"];
            let nouns = ["items", "buffer", "list", "table", "values", "nodes"];
            let description = format!(
                "/** {} the {} number {i} */",
                words.choose(&mut rng).unwrap(),
                nouns.choose(&mut rng).unwrap()
            );
            CorpusRecord {
                id: format!("rnd{i:04}"),
                code,
                description,
            }
        })
        .collect()
}

/// A random function in the supported subset, deterministic in `seed`.
pub fn random_function(seed: u64) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        locals: 0,
    };
    let name = [
        "process",
        "update_table",
        "scanItems",
        "compute",
        "walk_list",
    ]
    .choose(&mut g.rng)
    .unwrap();
    let mut body = String::new();
    g.locals = g.rng.gen_range(1..4);
    for v in 0..g.locals {
        let init = g.expr(1);
        body.push_str(&format!("    int v{v} = {init};\n"));
    }
    let count = g.rng.gen_range(1..6);
    for _ in 0..count {
        body.push_str(&g.stmt(1, false));
    }
    let ret = g.expr(1);
    body.push_str(&format!("    return {ret};\n"));
    format!("int {name}(int n, int *arr, struct item *p) {{\n{body}}}\n")
}

struct Gen {
    rng: ChaCha8Rng,
    locals: usize,
}

impl Gen {
    fn var(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => "n".into(),
            _ => format!("v{}", self.rng.gen_range(0..self.locals)),
        }
    }

    fn expr(&mut self, depth: usize) -> String {
        let leaf = depth >= 3 || self.rng.gen_bool(0.4);
        if leaf {
            return match self.rng.gen_range(0..5) {
                0 => self.rng.gen_range(0..100).to_string(),
                1 => "p->count".into(),
                2 => format!("arr[{}]", self.var()),
                _ => self.var(),
            };
        }
        match self.rng.gen_range(0..6) {
            0 => format!("-{}", self.expr(depth + 1)),
            1 => format!("helper({}, {})", self.expr(depth + 1), self.expr(depth + 1)),
            2 => format!(
                "({} ? {} : {})",
                self.cond(depth + 1),
                self.expr(depth + 1),
                self.expr(depth + 1)
            ),
            _ => {
                let op = ["+", "-", "*", "/", "%", "<<", "&"]
                    .choose(&mut self.rng)
                    .unwrap();
                format!("({} {op} {})", self.expr(depth + 1), self.expr(depth + 1))
            }
        }
    }

    fn cond(&mut self, depth: usize) -> String {
        let op = ["<", ">", "<=", ">=", "==", "!="]
            .choose(&mut self.rng)
            .unwrap();
        let base = format!("{} {op} {}", self.expr(depth + 1), self.expr(depth + 1));
        match self.rng.gen_range(0..4) {
            0 => format!("{base} && {} != 0", self.var()),
            1 => format!("!({base})"),
            _ => base,
        }
    }

    fn block(&mut self, depth: usize, in_loop: bool) -> String {
        let mut s = String::from("{\n");
        for _ in 0..self.rng.gen_range(1..4) {
            s.push_str(&self.stmt(depth + 1, in_loop));
        }
        s.push_str(&"    ".repeat(depth));
        s.push('}');
        s
    }

    fn stmt(&mut self, depth: usize, in_loop: bool) -> String {
        let pad = "    ".repeat(depth);
        let nested = depth < 4;
        let choice = self.rng.gen_range(0..if nested { 10 } else { 5 });
        let body = match choice {
            0 | 1 => {
                let op = ["=", "+=", "-=", "*="].choose(&mut self.rng).unwrap();
                format!("{} {op} {};", self.var(), self.expr(1))
            }
            2 => format!("printf(\"%d\\n\", {});", self.expr(1)),
            3 => match self.rng.gen_range(0..3) {
                0 => format!("{}++;", self.var()),
                1 => format!("p->count = {};", self.expr(1)),
                _ => format!("arr[{}] = {};", self.var(), self.expr(1)),
            },
            4 => {
                if in_loop && self.rng.gen_bool(0.5) {
                    if self.rng.gen_bool(0.5) {
                        "break;".into()
                    } else {
                        "continue;".into()
                    }
                } else {
                    format!("return {};", self.expr(1))
                }
            }
            5 | 6 => {
                let c = self.cond(1);
                let then = self.block(depth, in_loop);
                if self.rng.gen_bool(0.5) {
                    let els = self.block(depth, in_loop);
                    format!("if ({c}) {then} else {els}")
                } else {
                    format!("if ({c}) {then}")
                }
            }
            7 => {
                let c = self.cond(1);
                let b = self.block(depth, true);
                format!("while ({c}) {b}")
            }
            _ => {
                let b = self.block(depth, true);
                format!("for (int i = 0; i < n; i++) {b}")
            }
        };
        format!("{pad}{body}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templated_corpus_is_distinct() {
        let corpus = templated_corpus();
        assert_eq!(corpus.len(), 64);
        let mut descs: Vec<_> = corpus.iter().map(|r| r.description.clone()).collect();
        descs.sort();
        descs.dedup();
        assert_eq!(descs.len(), 64);
        for r in &corpus {
            crate::frontend::parse(&r.code).unwrap();
        }
    }

    #[test]
    fn random_functions_are_deterministic() {
        assert_eq!(random_function(9), random_function(9));
        assert_ne!(random_function(9), random_function(10));
    }
}
