// The five-component cut-set system from start to finish.
//
// Minimal cut sets {1}, {2,3}, {3,4}, {2,4,5}; every component fails with
// probability 0.1. Twelve structure-function evaluations settle all 32 states.

use lattice_reliability::{bundled, Criteria, Csilp};

fn main() {
    let sys = bundled("sys5").unwrap();
    let r = &sys.reliability;
    let run = Csilp::new(sys.evaluator(), r)
        .criteria(Criteria::max_level(5))
        .run()
        .unwrap();

    println!("evaluations: {}", run.evaluations);
    println!(
        "LOLP: {:.5} (bounds {:.5} .. {:.5})",
        run.lolp(),
        run.bounds.lower,
        run.bounds.upper
    );

    println!("\ncritical states in discovery order:");
    for rec in &run.records {
        println!(
            "  {:<10} level {}  dLOLP {:.5}  found at evaluation {}",
            sys.describe(&rec.state),
            rec.level,
            rec.delta_lolp,
            rec.evaluations_at_identification
        );
    }

    println!("\nfailure lattices:");
    for e in &run.ledger.failure_lattices {
        println!(
            "  {:<22} mass {:.5}",
            e.lattice.to_string(),
            r.lattice_probability(&e.lattice)
        );
    }
    println!("normal cells:");
    for c in &run.ledger.normal_cells {
        println!(
            "  {:<22} mass {:.5}",
            c.to_string(),
            r.lattice_probability(c)
        );
    }

    println!("\nbound trace (evaluations, lower, upper):");
    for t in &run.ledger.trace {
        println!("  {:>3}  {:.5}  {:.5}", t.evaluations, t.lower, t.upper);
    }

    assert_eq!(run.evaluations, 12);
    assert_eq!(run.records.len(), 4);
    assert!((run.lolp() - 0.11791).abs() < 1e-12);
}
