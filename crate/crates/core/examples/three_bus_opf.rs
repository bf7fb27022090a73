// Load shedding from a DC optimal power flow on a three-bus network.
//
// Bus A has a 100 MW generator; buses B and C each draw 50 MW. The lines
// A-B, A-C and B-C are rated 60 MW. Outages are applied by removing elements, then the
// minimum-shed LP is solved and its duals certify optimality.

use lattice_reliability::dcopf::{apply_state, build_shed_lp, min_load_shed};
use lattice_reliability::{bundled, SystemState};

fn main() {
    let sys = bundled("test3").unwrap();
    let lattice_reliability::system::Model::DcOpf(ev) = &sys.model else {
        unreachable!("test3 is a network model")
    };
    let net = ev.network();
    let n = net.components();

    for ids in [vec![], vec![2], vec![3], vec![2, 4], vec![1]] {
        let s = SystemState::from_ids(n, ids).unwrap();
        let shed = min_load_shed(net, &s).unwrap();
        println!("{:<12} shed {:>6.1} MW", sys.describe(&s), shed);
    }

    // Look inside one solve: with A-B out, everything must cross A-C, which
    // carries at most 60 of the 100 MW.
    let s = SystemState::from_ids(n, [2]).unwrap();
    let lp = build_shed_lp(&apply_state(net, &s).unwrap());
    let sol = lp.solve().unwrap().optimal().unwrap();
    println!(
        "\nLP: {} variables, {} rows, {} pivots, objective {:.6}",
        lp.num_vars(),
        lp.num_rows(),
        sol.iterations,
        sol.objective
    );
    println!("primal residual {:.2e}", lp.residual(&sol.x));
    println!("dual bound      {:.6}", lp.dual_bound(&sol.duals));
    assert!((sol.objective - 40.0).abs() < 1e-9);
    assert!((lp.dual_bound(&sol.duals) - sol.objective).abs() < 1e-7);
}
