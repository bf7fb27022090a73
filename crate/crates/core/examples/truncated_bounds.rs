// Stopping early: level caps, evaluation budgets and gap targets.
//
// Every truncated run still brackets the true LOLP. Budgets are checked
// between rounds, so a run may overshoot its budget by part of a round.

use lattice_reliability::{brute_force_oracle, bundled, Criteria, Csilp};

fn main() {
    let sys = bundled("threshold12").unwrap();
    let (ev, r) = (sys.evaluator(), &sys.reliability);
    let exact = brute_force_oracle(ev, r, 1).unwrap().lolp_exact;
    println!("exact LOLP {exact:.10}\n");

    let runs = [
        ("k <= 2", Criteria::max_level(2)),
        ("k <= 3", Criteria::max_level(3)),
        ("budget 60", Criteria::default().with_max_evaluations(60)),
        ("gap <= 1e-4", Criteria::default().with_min_gap(1e-4)),
        ("complete", Criteria::complete()),
    ];
    println!(
        "{:<12} {:>6} {:>14} {:>14}  stop",
        "criteria", "evals", "lower", "upper"
    );
    for (name, c) in runs {
        let plain = Csilp::new(ev, r).criteria(c).run().unwrap();
        let tight = Csilp::new(ev, r)
            .criteria(c)
            .tight_upper(true)
            .run()
            .unwrap();
        println!(
            "{name:<12} {:>6} {:>14.10} {:>14.10}  {}",
            plain.evaluations, plain.bounds.lower, plain.bounds.upper, plain.stop_reason
        );
        assert!(plain.bounds.lower <= exact + 1e-12 && exact <= plain.bounds.upper + 1e-12);
        // Certified-normal cells only ever hold evaluated states, so summing
        // cell masses gives the same upper bound.
        assert!((tight.bounds.upper - plain.bounds.upper).abs() < 1e-12);
    }

    let run = Csilp::new(ev, r)
        .criteria(Criteria::max_level(3))
        .run()
        .unwrap();
    let trace = &run.ledger.trace;
    println!(
        "\ntrace of the k <= 3 run ({} rows), every fifth row:",
        trace.len()
    );
    for t in trace.iter().step_by(5).chain(trace.last()) {
        println!("  {:>5} evals  gap {:.3e}", t.evaluations, t.gap());
    }
}
