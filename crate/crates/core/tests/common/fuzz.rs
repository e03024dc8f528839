//! Random and mutated model replies for parser fuzzing.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;

const SEEDS: [&str; 12] = [
    r#"{"frame_ids": [1, 2, 3], "justification": "the cup is visible"}"#,
    r#"```json
{"frame_ids": [4, 2, 2, 900], "justification": "frames {4} and 2"}
```"#,
    "{'frame_ids': [1], 'justification': 'red cup'}",
    r#"Here you go: {"frame_ids": [], "justification": "nothing"} thanks"#,
    r#"{"frame_ids": ["3", -1, 2.0, 1e40, null], "justification": 7}"#,
    "The frames show a cat.\nFinal Answer: (3)",
    "Final Answer: B",
    "(C) because the ball is red",
    "final answer - **(2)**",
    "Final Answer: (none)",
    "I think the answer is B",
    "2.",
];

const ALPHABET: &[char] = &[
    '{', '}', '[', ']', '"', '\'', ':', ',', '(', ')', '\\', '\n', ' ', '-', '.', '*', '0', '1',
    '2', '3', '9', 'A', 'B', 'e', 'f', 'x', 'é', '\u{212A}', '\u{17F}', '٥', '😀', '\0',
];

fn random_text<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.7) {
                *ALPHABET.choose(rng).unwrap()
            } else {
                char::from_u32(rng.random_range(0..0x11_0000)).unwrap_or('?')
            }
        })
        .collect()
}

fn mutate<R: Rng>(rng: &mut R, seed: &str) -> String {
    let mut chars: Vec<char> = seed.chars().collect();
    for _ in 0..rng.random_range(1..=6) {
        let at = rng.random_range(0..=chars.len());
        match rng.random_range(0..4) {
            0 if at < chars.len() => {
                chars.remove(at);
            }
            1 => chars.insert(at, *ALPHABET.choose(rng).unwrap()),
            2 if at < chars.len() => chars[at] = *ALPHABET.choose(rng).unwrap(),
            _ => {
                let cut = rng.random_range(0..=chars.len());
                chars.truncate(cut);
            }
        }
    }
    chars.into_iter().collect()
}

/// One fuzz input: pure noise, a mutated reply, or a reply with numbers
/// swapped for extreme values.
pub fn input<R: Rng>(rng: &mut R) -> String {
    match rng.random_range(0..4) {
        0 => random_text(rng, 80),
        1 | 2 => {
            let seed = *SEEDS.choose(rng).unwrap();
            mutate(rng, seed)
        }
        _ => {
            let n: i64 = rng.random_range(-5..=5) * 10_i64.pow(rng.random_range(0..19));
            SEEDS.choose(rng).unwrap().replace('2', &n.to_string())
        }
    }
}

/// Whether `text` certainly holds no JSON object with a `frame_ids` key.
pub fn clearly_not_json(text: &str) -> bool {
    !text.contains('{') || (!text.contains("frame_ids") && !text.contains("\\u"))
}
