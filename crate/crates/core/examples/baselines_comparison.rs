// The same system assessed four ways.
//
// A ten-unit capacity system (fails when the surviving capacity drops below
// demand) is small enough to enumerate exhaustively, which gives the exact
// LOLP to compare against.

use lattice_reliability::{
    brute_force_oracle, bundled, enumerate_assess, monte_carlo_assess, Criteria, Csilp, McsSettings,
};

fn main() {
    let sys = bundled("threshold10").unwrap();
    let (ev, r) = (sys.evaluator(), &sys.reliability);
    let exact = brute_force_oracle(ev, r, 1).unwrap();
    println!(
        "exhaustive: LOLP {:.12}, {} evaluations, {} minimal cut sets",
        exact.lolp_exact,
        exact.evaluations,
        exact.minimal_cut_sets.len()
    );

    println!(
        "\n{:>3} {:>22} {:>22}",
        "k", "lattice partition", "state enumeration"
    );
    for k in 1..=sys.components() {
        let c = Csilp::new(ev, r)
            .criteria(Criteria::max_level(k))
            .run()
            .unwrap();
        let s = enumerate_assess(ev, r, Criteria::max_level(k), 1).unwrap();
        println!(
            "{k:>3} {:>8} [{:.5},{:.5}] {:>8} [{:.5},{:.5}]",
            c.evaluations,
            c.bounds.lower,
            c.bounds.upper,
            s.evaluations,
            s.bounds.lower,
            s.bounds.upper
        );
        assert!(c.evaluations <= s.evaluations);
        assert!(c.bounds.lower <= exact.lolp_exact + 1e-12);
        assert!(exact.lolp_exact <= c.bounds.upper + 1e-12);
    }

    let full = Csilp::new(ev, r)
        .criteria(Criteria::complete())
        .run()
        .unwrap();
    assert!((full.lolp() - exact.lolp_exact).abs() < 1e-12);
    assert_eq!(full.critical.len(), exact.minimal_cut_sets.len());

    let settings = McsSettings {
        seed: 1,
        target_cov: Some(0.02),
        ..Default::default()
    };
    let mcs = monte_carlo_assess(ev, r, settings, 1).unwrap();
    println!(
        "\nMonte Carlo: {:.5} after {} samples ({} distinct states solved), cov {:.4}",
        mcs.estimate,
        mcs.samples,
        mcs.evaluations,
        mcs.coefficient_of_variation.unwrap_or(f64::NAN)
    );
}
