//! The sandwich solver against exhaustive search on a two-point target.
//!
//! With one anchor every quantity involved is a multiple of 1/64 for steps
//! up to 4, so searching that grid decides feasibility exactly.

use urysohn::cauchy::{sandwich_checks, solve_sandwich, BandRule, SandwichProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use urysohn::metric::{validate_metric, FinMetric};
use urysohn::random;
use urysohn::Rat;

const DEN: i128 = 64;

fn grid(lo: Rat, hi: Rat) -> impl Iterator<Item = Rat> {
    grid_den(lo, hi, DEN)
}

fn grid_den(lo: Rat, hi: Rat, den: i128) -> impl Iterator<Item = Rat> {
    let (lo, hi) = (lo * Rat::int(den), hi * Rat::int(den));
    let a = (lo.numer() + lo.denom() - 1).div_euclid(lo.denom());
    let b = hi.numer().div_euclid(hi.denom());
    (a..=b).map(move |n| Rat::new(n, den))
}

/// Some distance to the anchor in the band that also sits at exactly
/// `2^-l` from the previous point.
fn brute(t: Rat, prev: Option<Rat>, l: u32) -> Option<Rat> {
    // one anchor: position 1, a = 1/(2 * 2^(l+1))
    let a = Rat::pow2_neg(l + 2);
    let link = Rat::pow2_neg(l);
    grid(t + a, t + a + a).find(|&eta| {
        if !eta.is_positive() {
            return false;
        }
        let Some(dp) = prev else { return true };
        let mut m = FinMetric::with_points(["anchor", "prev", "new"]).unwrap();
        m.set(0, 1, dp);
        m.set(0, 2, eta);
        m.set(1, 2, link);
        validate_metric(&m).unwrap().is_empty()
    })
}

#[test]
fn verdicts_match_exhaustive_search() {
    let mut cases = 0;
    let mut feasible = 0;
    for l in 1..=4u32 {
        for tn in 1..=16 {
            let t = Rat::new(tn, 8);
            let prevs = std::iter::once(None).chain((1..=3 * DEN).map(|n| Some(Rat::new(n, DEN))));
            for prev in prevs {
                let p = SandwichProblem {
                    targets: vec![t],
                    anchor_d: vec![vec![Rat::ZERO]],
                    prev_d: prev.map(|d| vec![d]),
                    l,
                };
                let found = brute(t, prev, l);
                let solved = solve_sandwich(&p, BandRule::Staggered);
                cases += 1;
                assert_eq!(found.is_some(), solved.is_ok(), "t={t} prev={prev:?} l={l}: {solved:?}");
                if let Ok(s) = solved {
                    feasible += 1;
                    assert!(sandwich_checks(&p, &s, "s").iter().all(|c| c.holds()));
                    // the solver picks the least admissible distance
                    assert_eq!(Some(s.eta[0]), found);
                }
            }
        }
    }
    assert_eq!(cases, 4 * 16 * (3 * DEN as usize + 1));
    assert!(feasible > 0 && feasible < cases);
}

/// Two anchors: targets and distances are multiples of 1/8 and the band unit
/// is 1/(3 2^(l+1)), so the grid 1/192 holds every candidate.
#[test]
fn two_anchor_verdicts_match_exhaustive_search() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let two = Rat::int(2);
    let mut feasible = 0;
    for case in 0..400 {
        let l = 1 + case % 4;
        let mut m = random::metric(&mut r, 2, 8, two);
        let targets = random::katetov(&mut r, &m, 8, two);
        let prev = (case % 3 != 0).then(|| random::katetov(&mut r, &m, 8, two));
        let p = SandwichProblem {
            targets: targets.clone(),
            anchor_d: vec![vec![Rat::ZERO, m.d(0, 1)], vec![m.d(1, 0), Rat::ZERO]],
            prev_d: prev.clone(),
            l,
        };
        if let Some(d) = &prev {
            m.push_point("prev", d).unwrap();
        }
        let link = Rat::pow2_neg(l);
        let (b0, b1) = (p.band(BandRule::Staggered, 0), p.band(BandRule::Staggered, 1));
        let mut found = None;
        'search: for e0 in grid_den(b0.0, b0.1, 192) {
            for e1 in grid_den(b1.0, b1.1, 192) {
                let mut row = vec![e0, e1];
                row.extend(prev.as_ref().map(|_| link));
                let mut ext = m.clone();
                ext.push_point("new", &row).unwrap();
                if validate_metric(&ext).unwrap().is_empty() {
                    found = Some((e0, e1));
                    break 'search;
                }
            }
        }
        let solved = solve_sandwich(&p, BandRule::Staggered);
        assert_eq!(found.is_some(), solved.is_ok(), "case {case}: {p:?} {solved:?}");
        if let Ok(s) = solved {
            feasible += 1;
            assert!(sandwich_checks(&p, &s, "s").iter().all(|c| c.holds()));
        }
    }
    assert!(feasible > 0);
}
