//! Templated mini-language functions with paraphrased comments, for
//! controlled retrieval experiments. Each template family is one cluster;
//! clones differ only in function and variable names.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::CorpusRecord;
use crate::seed;

struct Family {
    comments: &'static [&'static str],
    names: &'static [&'static str],
    code: &'static str,
}

const FAMILIES: &[Family] = &[
    Family {
        comments: &["add {a} and {b}", "return the sum of {a} and {b}", "compute {a} plus {b}"],
        names: &["add", "plus", "sum_pair"],
        code: "def {f}({a}, {b}):\n    return {a} + {b}\n",
    },
    Family {
        comments: &["subtract {b} from {a}", "return {a} minus {b}", "difference of {a} and {b}"],
        names: &["subtract", "minus", "diff"],
        code: "def {f}({a}, {b}):\n    return {a} - {b}\n",
    },
    Family {
        comments: &["multiply {a} by {b}", "return the product of {a} and {b}", "compute {a} times {b}"],
        names: &["multiply", "times", "product"],
        code: "def {f}({a}, {b}):\n    return {a} * {b}\n",
    },
    Family {
        comments: &["divide {a} by {b}", "return {a} divided by {b}", "quotient of {a} and {b}"],
        names: &["divide", "quotient", "ratio"],
        code: "def {f}({a}, {b}):\n    return {a} / {b}\n",
    },
    Family {
        comments: &[
            "return the larger of {a} and {b}",
            "maximum of {a} and {b}",
            "pick the bigger value between {a} and {b}",
        ],
        names: &["maximum", "larger", "bigger"],
        code: "def {f}({a}, {b}):\n    if {a} > {b}:\n        return {a}\n    else:\n        return {b}\n",
    },
    Family {
        comments: &[
            "return the smaller of {a} and {b}",
            "minimum of {a} and {b}",
            "pick the lesser value between {a} and {b}",
        ],
        names: &["minimum", "smaller", "lesser"],
        code: "def {f}({a}, {b}):\n    if {a} < {b}:\n        return {a}\n    else:\n        return {b}\n",
    },
    Family {
        comments: &["absolute value of {a}", "return {a} without its sign", "make {a} non negative"],
        names: &["absolute", "magnitude", "abs_value"],
        code: "def {f}({a}):\n    if {a} < 0:\n        return -{a}\n    return {a}\n",
    },
    Family {
        comments: &["square {a}", "return {a} times itself", "compute the square of {a}"],
        names: &["square", "squared", "sq"],
        code: "def {f}({a}):\n    return {a} * {a}\n",
    },
    Family {
        comments: &["add {k} to {a}", "increase {a} by {k}", "increment {a} by {k}"],
        names: &["increment", "bump", "increase"],
        code: "def {f}({a}):\n    return {a} + {k}\n",
    },
    Family {
        comments: &["check whether {a} equals {b}", "test if {a} is equal to {b}", "compare {a} and {b} for equality"],
        names: &["equals", "is_equal", "same"],
        code: "def {f}({a}, {b}):\n    return {a} == {b}\n",
    },
    Family {
        comments: &["count the items in {a}", "return the length of {a}", "number of elements in {a}"],
        names: &["count", "length", "size_of"],
        code: "def {f}({a}):\n    return len({a})\n",
    },
    Family {
        comments: &["print a greeting for {a}", "say hello to {a}", "greet {a}"],
        names: &["greet", "hello", "welcome"],
        code: "def {f}({a}):\n    print(\"hello\", {a})\n",
    },
    Family {
        comments: &["average of {a} and {b}", "mean of {a} and {b}", "return the midpoint of {a} and {b}"],
        names: &["average", "mean", "midpoint"],
        code: "def {f}({a}, {b}):\n    return ({a} + {b}) / 2\n",
    },
    Family {
        comments: &["negate {a}", "return the opposite of {a}", "flip the sign of {a}"],
        names: &["negate", "opposite", "flip"],
        code: "def {f}({a}):\n    return -{a}\n",
    },
    Family {
        comments: &["scale {a} by {k}", "multiply {a} by the constant {k}", "return {a} scaled by {k}"],
        names: &["scale", "scaled", "stretch"],
        code: "def {f}({a}):\n    result = {a} * {k}\n    return result\n",
    },
    Family {
        comments: &[
            "check whether {a} is positive",
            "test if {a} is greater than zero",
            "return true when {a} is above zero",
        ],
        names: &["is_positive", "positive", "above_zero"],
        code: "def {f}({a}):\n    return {a} > 0\n",
    },
];

const VARIABLES: &[&str] = &[
    "x", "y", "a", "b", "value", "count", "total", "left", "right", "num", "item", "data", "size", "first", "second",
    "amount", "price", "score", "width", "height",
];

pub fn num_families() -> usize {
    FAMILIES.len()
}

fn render(template: &str, f: &str, a: &str, b: &str, k: u32) -> String {
    template.replace("{f}", f).replace("{a}", a).replace("{b}", b).replace("{k}", &k.to_string())
}

fn instance<R: Rng>(rng: &mut R, family: usize, with_comment: bool) -> CorpusRecord {
    let fam = &FAMILIES[family];
    let vars: Vec<&str> = VARIABLES.choose_multiple(rng, 2).copied().collect();
    let f = fam.names.choose(rng).unwrap();
    let k = rng.gen_range(1..10);
    let comment = fam.comments.choose(rng).unwrap();
    CorpusRecord {
        comment: with_comment.then(|| render(comment, f, vars[0], vars[1], k)),
        code: Some(render(fam.code, f, vars[0], vars[1], k)),
        ast_file: None,
        cluster_id: Some(family as u64),
    }
}

/// `n` examples cycling through the template families in random order; the
/// first `paired` of them carry comments.
pub fn synthetic_corpus(n: usize, paired: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..n).map(|i| i % FAMILIES.len()).collect();
    order.shuffle(&mut rng);
    order.into_iter().enumerate().map(|(i, fam)| instance(&mut rng, fam, i < paired)).collect()
}

/// `clusters` base functions (one per family, wrapping), each followed by
/// `per_cluster − 1` clones with fresh function and variable names.
pub fn clone_corpus(clusters: usize, per_cluster: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(clusters * per_cluster);
    for c in 0..clusters {
        for _ in 0..per_cluster {
            let mut r = instance(&mut rng, c % FAMILIES.len(), false);
            r.cluster_id = Some(c as u64);
            out.push(r);
        }
    }
    out
}
