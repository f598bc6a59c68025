use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sem_core::audit::{equilibrium_efficiency, ordinal_efficiency_oracle, sd_compare, EfficiencyVerdict, Holder, Relation};
use sem_core::demand::{rtb_gap_condition, ShockModel};
use sem_core::equilibrium::{solve, Fundamentals, SolverConfig};
use sem_core::market::{parse_market_spec, Budgets, SpecBuilder, WeakOrder};

const M: usize = 3;
const NULL: usize = 2;

/// All 13 weak orders over {x, y, o}.
fn all_orders() -> Vec<WeakOrder> {
    let mut out = Vec::new();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        out.push(vec![vec![p[0]], vec![p[1]], vec![p[2]]]);
    }
    for single in 0..3 {
        let pair: Vec<usize> = (0..3).filter(|&x| x != single).collect();
        out.push(vec![vec![single], pair.clone()]);
        out.push(vec![pair, vec![single]]);
    }
    out.push(vec![vec![0, 1, 2]]);
    out.into_iter().map(|t| WeakOrder::new(t, M, NULL).unwrap()).collect()
}

fn assignments(agents: usize, supply: [u64; 2]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let total = 3usize.pow(agents as u32);
    for code in 0..total {
        let mut c = code;
        let a: Vec<usize> = (0..agents)
            .map(|_| {
                let x = c % 3;
                c /= 3;
                x
            })
            .collect();
        if (0..2).all(|x| a.iter().filter(|&&y| y == x).count() as u64 <= supply[x]) {
            out.push(a);
        }
    }
    out
}

/// Pareto improvement among integral reallocations.
fn brute_force_dominated(prefs: &[&WeakOrder], a: &[usize], supply: [u64; 2]) -> bool {
    assignments(a.len(), supply).iter().any(|b| {
        let weak = (0..a.len()).all(|i| prefs[i].weakly_prefers(b[i], a[i]));
        let strict = (0..a.len()).any(|i| prefs[i].prefers(b[i], a[i]));
        weak && strict
    })
}

fn oracle(prefs: &[&WeakOrder], a: &[usize], supply: [u64; 2], exact: bool) -> EfficiencyVerdict {
    let holders: Vec<Holder<'_>> = prefs
        .iter()
        .zip(a)
        .map(|(p, &x)| {
            let mut l = vec![0.0; M];
            l[x] = 1.0;
            Holder { prefs: p, lottery: l, mass: 1.0 }
        })
        .collect();
    ordinal_efficiency_oracle(&holders, &[supply[0] as f64, supply[1] as f64, 0.0], NULL, exact).unwrap()
}

fn check_sound(prefs: &[&WeakOrder], a: &[usize], supply: [u64; 2], v: &EfficiencyVerdict) {
    if let EfficiencyVerdict::Dominated { dominating, .. } = v {
        for x in 0..2 {
            let col: f64 = dominating.iter().map(|r| r[x]).sum();
            assert!(col <= supply[x] as f64 + 1e-7);
        }
        let mut strict = false;
        for (i, row) in dominating.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-7);
            let mut held = vec![0.0; M];
            held[a[i]] = 1.0;
            let r = sd_compare(prefs[i], row, &held);
            assert!(r.weakly_dominates(), "agent {i}: {r:?}");
            strict |= r.relation == Relation::StrictlyDominates;
        }
        assert!(strict);
    }
}

#[test]
fn oracle_matches_brute_force_on_small_markets() {
    let orders = all_orders();
    assert_eq!(orders.len(), 13);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut dominated = 0;
    // every profile of up to two agents, every supply and every assignment
    for agents in 1..=2 {
        let profiles = 13usize.pow(agents as u32);
        for code in 0..profiles {
            let prefs: Vec<&WeakOrder> = (0..agents).map(|k| &orders[(code / 13usize.pow(k as u32)) % 13]).collect();
            for s0 in 0..=2 {
                for s1 in 0..=2 {
                    let supply = [s0, s1];
                    for a in assignments(agents, supply) {
                        let v = oracle(&prefs, &a, supply, false);
                        assert_eq!(!v.is_efficient(), brute_force_dominated(&prefs, &a, supply), "{prefs:?} {a:?} {supply:?}");
                        check_sound(&prefs, &a, supply, &v);
                        checked += 1;
                        dominated += !v.is_efficient() as usize;
                    }
                }
            }
        }
    }
    // sampled profiles of three and four agents, in both arithmetic modes
    for k in 0..1500 {
        let agents = 3 + k % 2;
        let prefs: Vec<&WeakOrder> = (0..agents).map(|_| &orders[rng.random_range(0..13)]).collect();
        let supply = [rng.random_range(0..=2), rng.random_range(0..=2)];
        let all = assignments(agents, supply);
        let a = &all[rng.random_range(0..all.len())];
        let expected = brute_force_dominated(&prefs, a, supply);
        for exact in [false, true] {
            if exact && k % 5 != 0 {
                continue;
            }
            let v = oracle(&prefs, a, supply, exact);
            assert_eq!(!v.is_efficient(), expected, "{prefs:?} {a:?} {supply:?} exact={exact}");
            check_sound(&prefs, a, supply, &v);
        }
        checked += 1;
        dominated += expected as usize;
    }
    assert!(dominated > 100 && checked - dominated > 100, "{dominated} of {checked}");
}

#[test]
fn ntb_equilibria_are_efficient() {
    let markets = [
        parse_market_spec(include_str!("../markets/two_period.toml")).unwrap(),
        parse_market_spec(include_str!("../markets/example1.toml")).unwrap(),
        parse_market_spec(include_str!("../markets/foster.toml")).unwrap(),
        parse_market_spec(include_str!("../markets/foster_unit.toml")).unwrap().replicate(3).unwrap(),
    ];
    let cfg = SolverConfig::precise();
    for spec in &markets {
        let shocks = cfg.shocks(spec);
        let supply: Vec<f64> = spec.objects.supply().iter().map(|&s| s as f64).collect();
        for t in 1..=spec.horizon {
            let f = Fundamentals::from_spec(spec, t, &supply, None).unwrap();
            let eq = solve(&f, &shocks, &cfg).unwrap();
            assert!(eq.converged, "{} t={t}", spec.name);
            let v = equilibrium_efficiency(&f, &eq, false).unwrap();
            assert!(v.is_efficient(), "{} t={t}: {v:?}", spec.name);
        }
    }
}

#[test]
fn two_period_equilibrium_is_efficient_in_exact_arithmetic() {
    let spec = parse_market_spec(include_str!("../markets/two_period.toml")).unwrap();
    let cfg = SolverConfig::precise();
    let f = Fundamentals::from_spec(&spec, 1, &spec.unit_supply(), None).unwrap();
    let eq = solve(&f, &cfg.shocks(&spec), &cfg).unwrap();
    assert!(equilibrium_efficiency(&f, &eq, true).unwrap().is_efficient());
}

#[test]
fn rtb_equilibria_with_separated_prices_are_efficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let orders = all_orders();
    let cfg = SolverConfig::precise();
    let mut certified = 0;
    for _ in 0..12 {
        let mut b = SpecBuilder::new("rtb", 1).object("x", rng.random_range(1..=2)).object("y", rng.random_range(1..=2));
        let k = rng.random_range(2..=4);
        let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..13)).collect();
        let names = ["x", "y", "o"];
        for (n, &p) in picks.iter().enumerate() {
            let tiers: Vec<Vec<&str>> = orders[p].tiers().iter().map(|t| t.iter().map(|&x| names[x]).collect()).collect();
            let refs: Vec<&[&str]> = tiers.iter().map(|t| t.as_slice()).collect();
            b = b.ty(&format!("t{n}"), &refs, None).density(1, &format!("t{n}"), 1.0 / k as f64);
        }
        let spec = b.budgets(Budgets::PerPeriod(vec![1.0])).shock(ShockModel::rtb(0.05, 0.02)).build().unwrap().replicate(3).unwrap();
        let supply: Vec<f64> = spec.objects.supply().iter().map(|&s| s as f64).collect();
        let f = Fundamentals::from_spec(&spec, 1, &supply, None).unwrap();
        let eq = solve(&f, &cfg.shocks(&spec), &cfg).unwrap();
        if !eq.converged {
            continue;
        }
        let (separated, _) = rtb_gap_condition(&eq.prices, 0.02);
        if separated {
            assert!(equilibrium_efficiency(&f, &eq, false).unwrap().is_efficient(), "{:?}", eq.prices);
            certified += 1;
        }
    }
    assert!(certified >= 3, "only {certified} markets met the gap condition");
}

fn lottery() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 3).prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dominating_witnesses_are_sound(picks in prop::collection::vec(0usize..13, 1..4), rows in prop::collection::vec(lottery(), 3), s in (0u64..3, 0u64..3)) {
        let orders = all_orders();
        let prefs: Vec<&WeakOrder> = picks.iter().map(|&p| &orders[p]).collect();
        let holders: Vec<Holder<'_>> = prefs.iter().zip(&rows).map(|(p, r)| Holder { prefs: p, lottery: r.clone(), mass: 1.0 }).collect();
        // supply at least the column mass so the input is feasible
        let supply: Vec<f64> = (0..M).map(|x| {
            let col: f64 = holders.iter().map(|h| h.lottery[x]).sum();
            if x == 0 { col.max(s.0 as f64) } else if x == 1 { col.max(s.1 as f64) } else { 0.0 }
        }).collect();
        let v = ordinal_efficiency_oracle(&holders, &supply, NULL, false).unwrap();
        if let EfficiencyVerdict::Dominated { dominating, .. } = &v {
            let mut strict = false;
            for (h, d) in holders.iter().zip(dominating) {
                let r = sd_compare(h.prefs, d, &h.lottery);
                prop_assert!(sem_core::audit::sd_compare_tol(h.prefs, d, &h.lottery, 1e-7).weakly_dominates(), "{:?}", r);
                strict |= r.relation == Relation::StrictlyDominates;
            }
            prop_assert!(strict);
            for x in 0..2 {
                prop_assert!(dominating.iter().map(|r| r[x]).sum::<f64>() <= supply[x] + 1e-7);
            }
        }
    }
}
