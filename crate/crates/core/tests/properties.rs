use proptest::prelude::*;

use pnl_attrib::io::{read_path, write_path};
use pnl_attrib::limit::continuous_triple;
use pnl_attrib::payoff::{Linear, Product, QuadraticForm};
use pnl_attrib::schedule::all_permutations;
use pnl_attrib::{
    asu_decompose, asu_two_perm, iasu_closed_form, iasu_two_perm, ioat_closed_form, isu_closed_form, oat_decompose,
    su_decompose, Path, Payoff, Permutation,
};

fn times(n: usize) -> Vec<f64> {
    (0..=n).map(|l| l as f64 / n as f64).collect()
}

/// Random-walk factor values with `d` factors over `n` steps.
fn arb_values(d: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-0.5f64..0.5, n), d).prop_map(|incs| {
        incs.into_iter()
            .map(|steps| {
                let mut acc = 1.0;
                std::iter::once(acc)
                    .chain(steps.into_iter().map(|s| {
                        acc += s;
                        acc
                    }))
                    .collect()
            })
            .collect()
    })
}

fn arb_continuous(d: usize) -> impl Strategy<Value = Path> {
    (2usize..12).prop_flat_map(move |n| arb_values(d, n).prop_map(move |v| Path::continuous(times(n), v).unwrap()))
}

/// Paths whose jump flags never coincide across factors.
fn arb_jumpy(d: usize) -> impl Strategy<Value = Path> {
    (2usize..12).prop_flat_map(move |n| {
        (arb_values(d, n), prop::collection::vec(prop::option::of(0..d), n)).prop_map(move |(v, owner)| {
            let flags = (0..d)
                .map(|i| owner.iter().map(|o| *o == Some(i)).collect())
                .collect();
            Path::new(times(n), v, flags).unwrap()
        })
    })
}

fn arb_perm(d: usize) -> impl Strategy<Value = Permutation> {
    Just((1..=d).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|images| Permutation::from_images(&images).unwrap())
}

/// Symmetric row-major matrix and linear term.
fn arb_quadratic_parts(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-1.0f64..1.0, d * d), prop::collection::vec(-1.0f64..1.0, d)).prop_map(move |(a, b)| {
        let mut sym = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                sym[i * d + j] = 0.5 * (a[i * d + j] + a[j * d + i]);
            }
        }
        (sym, b)
    })
}

fn arb_quadratic(d: usize) -> impl Strategy<Value = QuadraticForm> {
    arb_quadratic_parts(d).prop_map(|(a, b)| QuadraticForm::new(a, b).unwrap())
}

proptest! {
    #[test]
    fn su_is_additive(path in arb_jumpy(3), perm in arb_perm(3), q in arb_quadratic(3)) {
        for f in [&q as &dyn Payoff, &Product { dim: 3 }] {
            let dec = su_decompose(f, &path, &perm).unwrap();
            prop_assert!(dec.max_relative_additivity_error() < 1e-12);
        }
    }

    #[test]
    fn asu_is_mean_of_su(path in arb_continuous(3), q in arb_quadratic(3)) {
        let asu = asu_decompose(&q, &path).unwrap();
        let sus: Vec<_> = all_permutations(3).unwrap().map(|p| su_decompose(&q, &path, &p).unwrap()).collect();
        for i in 0..3 {
            for m in 0..path.times().len() {
                let mean = sus.iter().map(|s| s.contributions[i][m]).sum::<f64>() / 6.0;
                prop_assert!((asu.contributions[i][m] - mean).abs() < 1e-12);
            }
        }
        prop_assert!(asu.max_relative_additivity_error() < 1e-12);
    }

    #[test]
    fn two_factor_asu2_equals_asu(path in arb_jumpy(2), q in arb_quadratic(2)) {
        let a = asu_decompose(&q, &path).unwrap();
        let b = asu_two_perm(&q, &path).unwrap();
        prop_assert_eq!(a.contributions, b.contributions);
    }

    #[test]
    fn asu_is_symmetric_under_relabelling(path in arb_continuous(3), (a, b) in arb_quadratic_parts(3), order in arb_perm(3)) {
        // relabel factors: new factor k is old factor order[k]
        let order: Vec<usize> = order.images().iter().map(|i| i - 1).collect();
        let moved = path.permute_factors(&order).unwrap();
        let q = QuadraticForm::new(a.clone(), b.clone()).unwrap();
        let mut pa = vec![0.0; 9];
        let mut pb = vec![0.0; 3];
        for r in 0..3 {
            pb[r] = b[order[r]];
            for c in 0..3 {
                pa[r * 3 + c] = a[order[r] * 3 + order[c]];
            }
        }
        let pq = QuadraticForm::new(pa, pb).unwrap();
        let base = asu_decompose(&q, &path).unwrap();
        let relabelled = asu_decompose(&pq, &moved).unwrap();
        for k in 0..3 {
            for m in 0..path.times().len() {
                prop_assert!((relabelled.contributions[k][m] - base.contributions[order[k]][m]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_perm_iasu_is_bitwise_direct(path in arb_jumpy(3), q in arb_quadratic(3)) {
        let a = iasu_two_perm(&q, &path).unwrap();
        let b = iasu_closed_form(&q, &path).unwrap();
        let bits = |d: &pnl_attrib::Decomposition| -> Vec<Vec<u64>> {
            d.contributions.iter().map(|c| c.iter().map(|v| v.to_bits()).collect()).collect()
        };
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn linear_payoff_has_no_interactions(path in arb_jumpy(3), perm in arb_perm(3), c in prop::collection::vec(-2.0f64..2.0, 3)) {
        let f = Linear { coeffs: c.clone(), constant: 0.0 };
        let decs = [
            su_decompose(&f, &path, &perm).unwrap(),
            oat_decompose(&f, &path).unwrap(),
            isu_closed_form(&f, &path, &perm).unwrap(),
            ioat_closed_form(&f, &path).unwrap(),
            iasu_closed_form(&f, &path).unwrap(),
        ];
        for dec in &decs {
            for i in 0..3 {
                for m in 0..path.times().len() {
                    let expected = c[i] * (path.value(i, m) - path.value(i, 0));
                    prop_assert!((dec.contributions[i][m] - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_factor_gets_nothing(path in arb_jumpy(3), perm in arb_perm(3), q in arb_quadratic(3)) {
        let mut values: Vec<Vec<f64>> = (0..3).map(|i| path.factor_series(i)).collect();
        values[1] = vec![0.7; values[1].len()];
        let flags: Vec<Vec<bool>> = (0..3).map(|i| (1..=path.steps()).map(|l| path.is_jump(i, l)).collect()).collect();
        let path = Path::new(path.times().to_vec(), values, flags).unwrap();
        let decs = [
            su_decompose(&q, &path, &perm).unwrap(),
            oat_decompose(&q, &path).unwrap(),
            asu_decompose(&q, &path).unwrap(),
            isu_closed_form(&q, &path, &perm).unwrap(),
            ioat_closed_form(&q, &path).unwrap(),
            iasu_closed_form(&q, &path).unwrap(),
        ];
        for dec in &decs {
            prop_assert!(dec.contributions[1].iter().all(|&v| v == 0.0), "{}", dec.method);
        }
    }

    #[test]
    fn isu_is_order_free_without_cross_moves(n in 2usize..10, q in arb_quadratic(2), incs in prop::collection::vec(-0.5f64..0.5, 20)) {
        // factor 1 moves on even steps only, factor 2 on odd steps only
        let mut x1 = vec![1.0];
        let mut x2 = vec![-1.0];
        for l in 1..=n {
            let (a, b) = if l % 2 == 0 { (incs[l], 0.0) } else { (0.0, incs[l]) };
            x1.push(x1[l - 1] + a);
            x2.push(x2[l - 1] + b);
        }
        let path = Path::continuous(times(n), vec![x1, x2]).unwrap();
        let id = isu_closed_form(&q, &path, &Permutation::identity(2)).unwrap();
        let rev = isu_closed_form(&q, &path, &Permutation::reverse_identity(2)).unwrap();
        prop_assert_eq!(id.contributions, rev.contributions);
    }

    #[test]
    fn triple_shares_addends(path in arb_continuous(4), q in arb_quadratic(4), perm in arb_perm(4)) {
        let t = continuous_triple(&q, &path).unwrap();
        let isu = t.isu(&perm);
        let direct = isu_closed_form(&q, &path, &perm).unwrap();
        prop_assert_eq!(&isu.contributions, &direct.contributions);
        for i in 0..4 {
            for j in 0..4 {
                prop_assert_eq!(t.interaction.series(i, j), t.interaction.series(j, i));
            }
        }
    }

    #[test]
    fn covariation_identities(path in arb_jumpy(3)) {
        let n = path.steps();
        for i in 0..3 {
            for j in 0..3 {
                let c = path.covariation(i, j, n).unwrap();
                prop_assert_eq!(c, path.covariation(j, i, n).unwrap());
                let jumps: f64 = (1..=n)
                    .filter(|&l| path.is_jump(i, l) || path.is_jump(j, l))
                    .map(|l| path.increment(i, l) * path.increment(j, l))
                    .sum();
                prop_assert!((path.covariation_continuous(i, j, n).unwrap() + jumps - c).abs() < 1e-12);
            }
        }
        // polarization
        let sum: Vec<f64> = (0..=n).map(|l| path.value(0, l) + path.value(1, l)).collect();
        let joined = Path::continuous(path.times().to_vec(), vec![sum]).unwrap();
        let lhs = 2.0 * path.covariation(0, 1, n).unwrap();
        let rhs = joined.covariation(0, 0, n).unwrap() - path.covariation(0, 0, n).unwrap() - path.covariation(1, 1, n).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn path_csv_round_trip(path in arb_jumpy(2), scale in -300i32..300) {
        let vals: Vec<Vec<f64>> = (0..2).map(|i| path.factor_series(i).iter().map(|v| v * 10f64.powi(scale)).collect()).collect();
        let flags: Vec<Vec<bool>> = (0..2).map(|i| (1..=path.steps()).map(|l| path.is_jump(i, l)).collect()).collect();
        let p = Path::new(path.times().to_vec(), vals, flags).unwrap();
        let mut buf = Vec::new();
        write_path(&p, &mut buf).unwrap();
        prop_assert_eq!(read_path(&buf[..]).unwrap(), p);
    }
}
