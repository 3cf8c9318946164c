use ersn_core::textprep::stem;

const VECTORS: &str = include_str!("fixtures/snowball_english_vectors.txt");

#[test]
fn agrees_with_reference_vocabulary() {
    let mut total = 0usize;
    let mut mismatches = Vec::new();
    for line in VECTORS.lines().filter(|l| !l.starts_with('#')) {
        let (word, expected) = line.split_once('\t').expect("word<TAB>stem");
        total += 1;
        let got = stem(word);
        if got != expected {
            mismatches.push(format!("{word}: expected {expected}, got {got}"));
        }
    }
    let agreement = 1.0 - mismatches.len() as f64 / total as f64;
    println!("stemmer agreement {agreement:.6} ({} mismatches of {total})", mismatches.len());
    assert!(total > 29_000);
    assert!(
        agreement >= 0.999,
        "agreement {agreement:.5} over {total} words; first mismatches: {:?}",
        &mismatches[..mismatches.len().min(20)]
    );
}
