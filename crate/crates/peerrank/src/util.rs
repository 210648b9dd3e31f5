//! Small shared utilities: stable hashing for seed derivation, seeded RNG
//! construction, label alphabets, and word counting.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// 64-bit FNV-1a over a byte string. Used (instead of `DefaultHasher`, whose
/// output is not guaranteed stable across releases) to derive per-task seeds
/// from natural keys so that every stochastic choice is a pure function of
/// the run seed plus the task identity.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Derives a child seed from a master seed and a path of string parts.
/// Parts are length-prefixed so distinct paths never collide by
/// concatenation (e.g. `["ab", "c"]` vs `["a", "bc"]`).
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut buf = Vec::with_capacity(16 + parts.iter().map(|p| p.len() + 9).sum::<usize>());
    buf.extend_from_slice(&master.to_le_bytes());
    for part in parts {
        buf.extend_from_slice(&(part.len() as u64).to_le_bytes());
        buf.extend_from_slice(part.as_bytes());
        buf.push(0x1f);
    }
    fnv1a64(&buf)
}

/// A deterministic RNG for the given master seed and derivation path.
pub fn derived_rng(master: u64, parts: &[&str]) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_seed(master, parts))
}

/// Neutral label for the 0-based `index`-th displayed answer: `A`..`Z`,
/// then `AA`, `AB`, ... for cohorts larger than the alphabet.
pub fn letter_label(index: usize) -> String {
    let mut n = index;
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ASCII letters")
}

/// Whitespace-delimited word count, the convention used for prompt word
/// limits and judge reason-length checks.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Rounds half away from zero to the nearest integer (so 7.5 -> 8), the
/// convention used when discretizing simulated judge scores.
pub fn round_half_up(x: f64) -> f64 {
    if x >= 0.0 {
        (x + 0.5).floor()
    } else {
        (x - 0.5).ceil()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fnv_matches_published_vectors() {
        // Reference vectors for 64-bit FNV-1a.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn derive_seed_separates_paths() {
        let a = derive_seed(1, &["ab", "c"]);
        let b = derive_seed(1, &["a", "bc"]);
        assert_ne!(a, b);
        assert_ne!(derive_seed(1, &["x"]), derive_seed(2, &["x"]));
        assert_eq!(derive_seed(9, &["p", "q"]), derive_seed(9, &["p", "q"]));
    }

    #[test]
    fn derived_rng_is_reproducible() {
        let mut r1 = derived_rng(42, &["judge", "alpha", "q_beta_0001"]);
        let mut r2 = derived_rng(42, &["judge", "alpha", "q_beta_0001"]);
        let xs: Vec<u64> = (0..4).map(|_| r1.gen()).collect();
        let ys: Vec<u64> = (0..4).map(|_| r2.gen()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn letter_labels_extend_past_z() {
        assert_eq!(letter_label(0), "A");
        assert_eq!(letter_label(25), "Z");
        assert_eq!(letter_label(26), "AA");
        assert_eq!(letter_label(27), "AB");
        assert_eq!(letter_label(51), "AZ");
        assert_eq!(letter_label(52), "BA");
    }

    #[test]
    fn word_count_splits_on_any_whitespace() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("  one  two\nthree\t"), 3);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_up(7.5), 8.0);
        assert_eq!(round_half_up(7.49), 7.0);
        assert_eq!(round_half_up(-2.5), -3.0);
        assert_eq!(round_half_up(0.0), 0.0);
    }
}
