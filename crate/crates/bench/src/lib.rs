//! Fixed inputs for the benchmarks in `benches/`.

use reasonconf_core::dpo::ToyPolicy;
use reasonconf_core::gateway::TokenLogprob;

/// 24-game expressions paired with their numbers, valid and invalid.
pub fn game24_cases() -> Vec<(&'static str, [i64; 4])> {
    vec![
        ("(4 + 8) * (6 - 4) = 24", [4, 4, 6, 8]),
        ("8 / (3 - 8 / 3)", [3, 3, 8, 8]),
        ("((13 - 1) * (2 + 0)) - 0", [13, 1, 2, 0]),
        ("(1 + 2) * (3 + 4)", [1, 2, 3, 4]),
        ("12 * 2 / (5 - 5)", [12, 2, 5, 5]),
        ("(6 * 4 + (1 - 1", [6, 4, 1, 1]),
    ]
}

/// A policy over `vocab_size` symbols with deterministic, non-uniform
/// logits.
pub fn toy_policy(vocab_size: usize, context_order: usize) -> ToyPolicy {
    let names: Vec<String> = (0..vocab_size).map(|i| format!("t{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut policy = ToyPolicy::uniform(&refs, context_order).expect("valid vocabulary");
    for (i, p) in policy.params.iter_mut().enumerate() {
        *p = ((i * 7919) % 113) as f64 / 113.0 - 0.5;
    }
    policy
}

/// A token sequence of length `len` over `vocab_size` symbols.
pub fn sequence(vocab_size: usize, len: usize, offset: usize) -> Vec<usize> {
    (0..len).map(|i| (i * 3 + offset) % vocab_size).collect()
}

/// A top-20 list with both A/B spellings present.
pub fn top_logprobs() -> Vec<TokenLogprob> {
    let mut top = vec![
        TokenLogprob::new("A", -0.1),
        TokenLogprob::new(" A", -3.2),
        TokenLogprob::new("B", -2.3),
        TokenLogprob::new(" B", -4.0),
    ];
    top.extend((0..16).map(|i| TokenLogprob::new(format!("w{i}"), -5.0 - i as f64)));
    top
}

/// Prediction/expected literal pairs for output prediction.
pub fn crux_cases() -> Vec<(&'static str, &'static str)> {
    vec![
        ("'baab'", "\"baab\""),
        ("[1, 2, {'a': (3, 4.0)}]", "[1,2,{'a':(3,4.0)}]"),
        ("{'x': [True, None], 'y': -7}", "{'y': -7, 'x': [True, None]}"),
        ("(1,)", "(1, )"),
        ("not a literal (", "not a literal ("),
    ]
}
