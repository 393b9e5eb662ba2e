//! Lexicon files at dictionary scale.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wordcomm_core::codec::Scheme;
use wordcomm_core::lexicon::Lexicon;

const SYLLABLES: [&str; 24] = [
    "ka", "ki", "ku", "ke", "ko", "sa", "shi", "su", "se", "so", "ta", "chi", "tsu", "te", "to", "na", "ni",
    "mi", "ra", "ri", "ru", "yo", "nn", "a",
];

fn synthetic_tsv(n: usize, seed: u64) -> (String, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < n {
        let len = rng.random_range(2..=5);
        let word: String = (0..len).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect();
        if word.starts_with("nn") {
            continue;
        }
        seen.insert(word);
    }
    let words: Vec<String> = seen.into_iter().collect();
    let mut text = String::from("# surface\treading\tgloss\trank\n");
    for (i, w) in words.iter().enumerate() {
        text.push_str(&format!("{w}\t{w}\t\t{}\n", i + 1));
    }
    (text, words)
}

#[test]
fn ten_thousand_entries_build_fast_and_round_trip() {
    let (text, words) = synthetic_tsv(10_000, 1);
    let scheme = Scheme::japanese();
    let t = Instant::now();
    let lex = Lexicon::from_tsv("synthetic", &scheme, &text).unwrap();
    let elapsed = t.elapsed();
    assert!(elapsed < Duration::from_secs(1), "build took {elapsed:?}");
    assert_eq!(lex.len(), 10_000);
    for w in &words {
        let sk = lex.skeletonize(w).unwrap();
        assert!(lex.query(&sk).iter().any(|e| &e.reading == w), "{w} not under {sk}");
    }
}

#[test]
fn file_load_matches_in_memory_build() {
    let (text, _) = synthetic_tsv(500, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("words.tsv");
    std::fs::write(&path, &text).unwrap();
    let scheme = Scheme::japanese();
    let loaded = Lexicon::load("synthetic", &scheme, &path).unwrap();
    let built = Lexicon::from_tsv("synthetic", &scheme, &text).unwrap();
    assert_eq!(loaded.entries(), built.entries());
}

#[test]
fn bundled_english_answers_sports_skeleton() {
    let lex = Lexicon::bundled("english").unwrap();
    let sk = lex.skeletonize("sports").unwrap();
    assert_eq!(sk.to_string(), "4,1,5");
    assert!(lex.query(&sk).iter().any(|e| e.reading == "sports"));
    assert!(lex.warnings().is_empty());
}
