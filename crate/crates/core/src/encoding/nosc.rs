use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate draws allowed before a codebook search gives up.
pub const DEFAULT_DRAW_BUDGET: u64 = 1_000_000;
/// Consecutive rejected draws after which the search restarts from scratch.
const STALL_LIMIT: u64 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoscParams {
    /// Number of codes.
    pub classes: usize,
    /// Code length.
    pub len: usize,
    /// Ones per code.
    pub ones: usize,
    /// Maximum number of shared ones between two codes.
    pub max_overlap: usize,
}

impl NoscParams {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.ones == 0 || self.ones > self.len || self.max_overlap > self.ones {
            return Err(Error::Config(format!(
                "need C >= 1, 0 < n <= N and K <= n; got C={}, N={}, n={}, K={}",
                self.classes, self.len, self.ones, self.max_overlap
            )));
        }
        Ok(())
    }
}

/// Near-orthogonal sparse binary codes, one per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoscCodebook {
    pub params: NoscParams,
    pub seed: u64,
    /// Sorted positions of the ones of each code.
    codes: Vec<Vec<usize>>,
}

impl NoscCodebook {
    pub fn codes(&self) -> &[Vec<usize>] {
        &self.codes
    }

    /// Dense 0/1 activation vector of class `c`.
    pub fn dense(&self, c: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.params.len];
        for &i in &self.codes[c] {
            v[i] = 1.0;
        }
        v
    }

    pub fn overlap(&self, a: usize, b: usize) -> usize {
        shared(&self.codes[a], &self.codes[b])
    }

    /// Checks exact sparsity and the pairwise overlap bound.
    pub fn verify(&self) -> bool {
        let p = self.params;
        self.codes.len() == p.classes
            && self.codes.iter().all(|c| c.len() == p.ones && c.iter().all(|&i| i < p.len))
            && (0..self.codes.len())
                .all(|a| (a + 1..self.codes.len()).all(|b| self.overlap(a, b) <= p.max_overlap))
    }
}

fn shared(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub fn generate_nosc(params: NoscParams, seed: u64) -> Result<NoscCodebook> {
    generate_nosc_with_budget(params, seed, DEFAULT_DRAW_BUDGET)
}

/// Randomized rejection search: draw uniform `n`-subsets, keep those within
/// the overlap bound of every accepted code, restart on stall.
pub fn generate_nosc_with_budget(params: NoscParams, seed: u64, budget: u64) -> Result<NoscCodebook> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted: Vec<Vec<usize>> = Vec::with_capacity(params.classes);
    let mut since_accept = 0u64;
    for _ in 0..budget {
        let mut cand = index::sample(&mut rng, params.len, params.ones).into_vec();
        cand.sort_unstable();
        if accepted.iter().all(|c| shared(c, &cand) <= params.max_overlap) {
            accepted.push(cand);
            since_accept = 0;
            if accepted.len() == params.classes {
                return Ok(NoscCodebook {
                    params,
                    seed,
                    codes: accepted,
                });
            }
        } else {
            since_accept += 1;
            if since_accept >= STALL_LIMIT {
                accepted.clear();
                since_accept = 0;
            }
        }
    }
    Err(Error::NoscInfeasible {
        c: params.classes,
        len: params.len,
        ones: params.ones,
        max_overlap: params.max_overlap,
        attempts: budget,
    })
}

/// Writes `NOSC1 <C> <N> <n> <K> <seed>` followed by one 0/1 row per code.
pub fn write_nosc(book: &NoscCodebook, path: &Path) -> Result<()> {
    let p = book.params;
    let mut out = format!("NOSC1 {} {} {} {} {}\n", p.classes, p.len, p.ones, p.max_overlap, book.seed);
    for c in 0..p.classes {
        let row: Vec<&str> = book.dense(c).iter().map(|&x| if x > 0.0 { "1" } else { "0" }).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_nosc(path: &Path) -> Result<NoscCodebook> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let bad = |reason: &str| Error::MalformedHeader {
        path: path.into(),
        reason: reason.into(),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "NOSC1" {
        return Err(bad("expected `NOSC1 <C> <N> <n> <K> <seed>`"));
    }
    let num = |s: &str| s.parse::<u64>().map_err(|_| bad(&format!("not an integer: {s}")));
    let params = NoscParams {
        classes: num(fields[1])? as usize,
        len: num(fields[2])? as usize,
        ones: num(fields[3])? as usize,
        max_overlap: num(fields[4])? as usize,
    };
    let seed = num(fields[5])?;
    let mut codes = Vec::with_capacity(params.classes);
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bits: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
        if bits.len() != params.len {
            return Err(Error::RowLength {
                path: path.into(),
                line: i + 2,
                expected: params.len,
                found: bits.len(),
            });
        }
        let mut code = Vec::new();
        for (j, b) in bits.into_iter().enumerate() {
            match b {
                '1' => code.push(j),
                '0' => {}
                other => {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: i + 2,
                        reason: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
        codes.push(code);
    }
    let book = NoscCodebook { params, seed, codes };
    if !book.verify() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            reason: "codes violate the header's sparsity or overlap constraints".into(),
        });
    }
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fig2_configuration_is_feasible() {
        let params = NoscParams { classes: 10, len: 15, ones: 2, max_overlap: 1 };
        let book = generate_nosc(params, 7).unwrap();
        assert_eq!(book.codes().len(), 10);
        assert!(book.verify());
        for c in 0..10 {
            assert_eq!(book.dense(c).iter().filter(|&&x| x == 1.0).count(), 2);
        }
    }

    #[test]
    fn single_code_is_unconstrained() {
        let params = NoscParams { classes: 1, len: 5, ones: 2, max_overlap: 0 };
        let book = generate_nosc(params, 0).unwrap();
        assert_eq!(book.codes()[0].len(), 2);
    }

    /// All 2-subsets of a 4-set; a family with pairwise overlap 0 has at most 2 members.
    fn max_disjoint_pairs_of_four() -> usize {
        let subsets: Vec<[usize; 2]> = (0..4).flat_map(|a| (a + 1..4).map(move |b| [a, b])).collect();
        assert_eq!(subsets.len(), 6);
        let mut best = 0;
        for mask in 0u32..(1 << subsets.len()) {
            let chosen: Vec<_> = (0..subsets.len()).filter(|i| mask >> i & 1 == 1).map(|i| subsets[i]).collect();
            let ok = chosen.iter().enumerate().all(|(i, a)| {
                chosen[i + 1..].iter().all(|b| a.iter().filter(|x| b.contains(x)).count() == 0)
            });
            if ok {
                best = best.max(chosen.len());
            }
        }
        best
    }

    #[test]
    fn infeasible_configuration_errors() {
        assert_eq!(max_disjoint_pairs_of_four(), 2);
        let params = NoscParams { classes: 4, len: 4, ones: 2, max_overlap: 0 };
        assert!(matches!(
            generate_nosc_with_budget(params, 1, 50_000),
            Err(Error::NoscInfeasible { attempts: 50_000, .. })
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let params = NoscParams { classes: 2, len: 4, ones: 5, max_overlap: 1 };
        assert!(matches!(generate_nosc(params, 0), Err(Error::Config(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("avim-nosc-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("codes.txt");
        let book = generate_nosc(NoscParams { classes: 10, len: 15, ones: 3, max_overlap: 1 }, 3).unwrap();
        write_nosc(&book, &path).unwrap();
        assert_eq!(load_nosc(&path).unwrap(), book);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generated_codebooks_satisfy_invariants(
            len in 6usize..40,
            ones_frac in 0.05f64..0.5,
            classes in 1usize..12,
            seed in any::<u64>(),
        ) {
            let ones = ((len as f64 * ones_frac) as usize).max(1);
            // Overlap bound of n - 1 is always satisfiable by distinct subsets
            // when C is below the number of n-subsets.
            let params = NoscParams { classes, len, ones, max_overlap: ones.saturating_sub(1).max(1).min(ones) };
            let book = generate_nosc(params, seed).unwrap();
            prop_assert!(book.verify());
            prop_assert_eq!(generate_nosc(params, seed).unwrap(), book);
        }
    }
}
