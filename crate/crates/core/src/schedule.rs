//! Update orders and their B / C selector matrices.

use std::fmt;
use std::str::FromStr;

use crate::error::{AttribError, Result};

/// Default cap on `d` for full permutation enumeration (8! = 40320).
pub const DEFAULT_PERMUTATION_CAP: usize = 8;

/// A permutation `π` of the factor labels, stored as its image list.
///
/// `rank(i)` is the 0-based position at which factor `i` (0-based) is updated,
/// so `π(i + 1) = rank(i) + 1` in 1-based notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    ranks: Vec<usize>,
}

impl Permutation {
    /// From 1-based images `(π(1), ..., π(d))`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let d = images.len();
        if d == 0 {
            return Err(AttribError::InvalidPermutation {
                d,
                detail: "empty".into(),
            });
        }
        let mut seen = vec![false; d];
        for &img in images {
            if img == 0 || img > d {
                return Err(AttribError::InvalidPermutation {
                    d,
                    detail: format!("image {img} out of range"),
                });
            }
            if std::mem::replace(&mut seen[img - 1], true) {
                return Err(AttribError::InvalidPermutation {
                    d,
                    detail: format!("image {img} repeated"),
                });
            }
        }
        Ok(Self {
            ranks: images.iter().map(|&v| v - 1).collect(),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            ranks: (0..d).collect(),
        }
    }

    /// `π'(i) = d + 1 - i`.
    pub fn reverse_identity(d: usize) -> Self {
        Self {
            ranks: (0..d).rev().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.ranks.len()
    }

    /// 0-based update position of factor `i`.
    pub fn rank(&self, i: usize) -> usize {
        self.ranks[i]
    }

    /// 1-based image list.
    pub fn images(&self) -> Vec<usize> {
        self.ranks.iter().map(|r| r + 1).collect()
    }

    /// Factors in update order (the inverse permutation, 0-based).
    pub fn update_order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (i, &r) in self.ranks.iter().enumerate() {
            order[r] = i;
        }
        order
    }

    /// True when factor `j` is updated strictly before factor `i`.
    pub fn precedes(&self, j: usize, i: usize) -> bool {
        self.ranks[j] < self.ranks[i]
    }

    /// Parses `id`, `rev` or a comma-separated image list for dimension `d`.
    pub fn parse_for_dim(text: &str, d: usize) -> Result<Self> {
        let perm = match text.trim() {
            "id" => Self::identity(d),
            "rev" => Self::reverse_identity(d),
            other => other.parse()?,
        };
        if perm.dim() != d {
            return Err(AttribError::InvalidPermutation {
                d,
                detail: format!("got {} images", perm.dim()),
            });
        }
        Ok(perm)
    }
}

impl FromStr for Permutation {
    type Err = AttribError;

    fn from_str(s: &str) -> Result<Self> {
        let images = s
            .split(',')
            .map(|tok| {
                tok.trim().parse::<usize>().map_err(|_| {
                    AttribError::Parse(format!("invalid permutation entry {tok:?} in {s:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(&images)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.images().iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// A permutation together with its selector matrices.
///
/// `B[i][j] = 1` iff `π(j) <= π(i)` and `C = B - I`. Row `i` of `B` marks the
/// factors already advanced once factor `i` has been updated; row `i` of `C`
/// marks those advanced just before.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateSchedule {
    pub perm: Permutation,
    pub b: Vec<Vec<bool>>,
    pub c: Vec<Vec<bool>>,
}

impl UpdateSchedule {
    pub fn new(perm: Permutation) -> Self {
        let d = perm.dim();
        let b: Vec<Vec<bool>> = (0..d)
            .map(|i| (0..d).map(|j| perm.rank(j) <= perm.rank(i)).collect())
            .collect();
        let c = b
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut row = row.clone();
                row[i] = false;
                row
            })
            .collect();
        Self { perm, b, c }
    }

    pub fn dim(&self) -> usize {
        self.perm.dim()
    }

    pub fn b_row(&self, i: usize) -> &[bool] {
        &self.b[i]
    }

    pub fn c_row(&self, i: usize) -> &[bool] {
        &self.c[i]
    }
}

/// Builds `B^π` and `C^π` from a 1-based image list.
pub fn build_schedule(images: &[usize]) -> Result<UpdateSchedule> {
    Ok(UpdateSchedule::new(Permutation::from_images(images)?))
}

pub fn reverse_identity(d: usize) -> Permutation {
    Permutation::reverse_identity(d)
}

pub fn factorial(d: usize) -> usize {
    (1..=d).product()
}

fn check_cap(d: usize, cap: usize) -> Result<()> {
    if d == 0 {
        return Err(AttribError::InvalidParameter("d must be at least 1".into()));
    }
    if d > cap {
        return Err(AttribError::PermutationCap { d, cap });
    }
    Ok(())
}

/// All `d!` permutations in lexicographic order of their image lists.
pub fn all_permutations(d: usize) -> Result<Permutations> {
    all_permutations_capped(d, DEFAULT_PERMUTATION_CAP)
}

pub fn all_permutations_capped(d: usize, cap: usize) -> Result<Permutations> {
    check_cap(d, cap)?;
    Ok(Permutations {
        next: Some((0..d).collect()),
    })
}

/// Lexicographic permutation iterator (next-permutation algorithm).
#[derive(Debug, Clone)]
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let n = succ.len();
        if let Some(k) = (0..n.saturating_sub(1)).rev().find(|&k| succ[k] < succ[k + 1]) {
            let l = (k + 1..n).rev().find(|&l| succ[k] < succ[l]).unwrap();
            succ.swap(k, l);
            succ[k + 1..].reverse();
            self.next = Some(succ);
        }
        Some(Permutation { ranks: current })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_int(m: &[Vec<bool>]) -> Vec<Vec<u8>> {
        m.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    #[test]
    fn worked_three_factor_schedule() {
        let s = build_schedule(&[1, 3, 2]).unwrap();
        assert_eq!(as_int(&s.b), vec![vec![1, 0, 0], vec![1, 1, 1], vec![1, 0, 1]]);
        assert_eq!(as_int(&s.c), vec![vec![0, 0, 0], vec![1, 0, 1], vec![1, 0, 0]]);
    }

    #[test]
    fn identity_gives_lower_triangle() {
        let s = build_schedule(&[1, 2]).unwrap();
        assert_eq!(as_int(&s.b), vec![vec![1, 0], vec![1, 1]]);
        let s = build_schedule(&[1]).unwrap();
        assert_eq!(as_int(&s.b), vec![vec![1]]);
        assert_eq!(as_int(&s.c), vec![vec![0]]);
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(build_schedule(&[1, 1]).is_err());
        assert!(build_schedule(&[0, 1]).is_err());
        assert!(build_schedule(&[1, 3]).is_err());
        assert!(build_schedule(&[]).is_err());
    }

    #[test]
    fn enumeration_order_and_counts() {
        let p2: Vec<Vec<usize>> = all_permutations(2).unwrap().map(|p| p.images()).collect();
        assert_eq!(p2, vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(all_permutations(3).unwrap().count(), 6);
        assert_eq!(all_permutations(1).unwrap().count(), 1);
        assert_eq!(71 * all_permutations(3).unwrap().count(), 426);
        assert!(matches!(
            all_permutations(9),
            Err(AttribError::PermutationCap { d: 9, cap: 8 })
        ));
        assert_eq!(all_permutations_capped(9, 9).unwrap().count(), 362_880);
    }

    #[test]
    fn reverse_identity_images() {
        assert_eq!(reverse_identity(2).images(), vec![2, 1]);
        assert_eq!(reverse_identity(4).images(), vec![4, 3, 2, 1]);
        assert_eq!(reverse_identity(1).images(), vec![1]);
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(Permutation::parse_for_dim("id", 3).unwrap().images(), vec![1, 2, 3]);
        assert_eq!(Permutation::parse_for_dim("rev", 3).unwrap().images(), vec![3, 2, 1]);
        let p = Permutation::parse_for_dim("2, 3,1", 3).unwrap();
        assert_eq!(p.to_string(), "2,3,1");
        assert_eq!(p.update_order(), vec![2, 0, 1]);
        assert!(Permutation::parse_for_dim("1,2", 3).is_err());
        assert!(Permutation::parse_for_dim("a,b", 2).is_err());
    }

    #[test]
    fn structural_invariants_all_small_perms() {
        for d in 1..=5 {
            for perm in all_permutations(d).unwrap() {
                let s = UpdateSchedule::new(perm.clone());
                let order = perm.update_order();
                let (last, first) = (order[d - 1], order[0]);
                assert!(s.b[last].iter().all(|&x| x));
                assert!(s.c[first].iter().all(|&x| !x));
                for i in 0..d {
                    assert!(s.b[i][i] && !s.c[i][i]);
                    for j in 0..d {
                        if i != j {
                            assert_eq!(s.b[i][j], s.c[i][j]);
                        }
                    }
                }
                // telescoping pairing: each B row except the last matches exactly one C row
                for i in (0..d).filter(|&i| i != last) {
                    let matches = (0..d)
                        .filter(|&j| j != first && s.c[j] == s.b[i])
                        .count();
                    assert_eq!(matches, 1);
                }
            }
        }
    }

    #[test]
    fn averaged_precedence_is_one_half() {
        for d in 1..=6 {
            let perms: Vec<_> = all_permutations(d).unwrap().collect();
            let total = perms.len() as f64;
            for i in 0..d {
                for j in 0..d {
                    let count = perms.iter().filter(|p| p.precedes(j, i)).count() as f64;
                    let expected = if i == j { 0.0 } else { 0.5 };
                    assert_eq!(count / total, expected);
                }
            }
        }
    }
}
