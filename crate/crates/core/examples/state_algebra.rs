// States, lattices and probabilities.
//
// A state is the set of failed components (ids start at 1). Intervals
// [lower, upper] of the subset order are lattices; their probability mass
// factorizes over components.

use lattice_reliability::{ComponentReliability, Lattice, SystemState};

fn main() {
    let n = 5;
    let a = SystemState::from_ids(n, [2, 4]).unwrap();
    let b = SystemState::from_ids(n, [3, 4, 5]).unwrap();
    println!("a = {a}, b = {b}");
    println!(
        "a v b = {}, a ^ b = {}",
        a.join(&b).unwrap(),
        a.meet(&b).unwrap()
    );
    println!("level(a) = {}, a <= b: {}", a.level(), a.leq(&b).unwrap());

    // States sort by level first, then lexicographically.
    let mut all = Lattice::whole(n).members(2).unwrap();
    all.reverse();
    all.sort();
    let names: Vec<String> = all.iter().map(|s| s.to_string()).collect();
    println!("level-2 states in order: {}", names.join(" "));

    let l = Lattice::new(a.clone(), SystemState::from_ids(n, [1, 2, 4, 5]).unwrap()).unwrap();
    println!("{l}: dimension {}, {} states", l.dimension(), l.size());
    for k in 0..=l.dimension() {
        let m: Vec<String> = l
            .members(k)
            .unwrap()
            .iter()
            .map(|s| s.to_string())
            .collect();
        println!("  relative level {k}: {}", m.join(" "));
    }

    let r = ComponentReliability::new(vec![0.1, 0.2, 0.05, 0.1, 0.3]).unwrap();
    let by_sum: f64 = l.all_members().iter().map(|s| r.state_probability(s)).sum();
    let closed = r.lattice_probability(&l);
    println!("P({l}) = {closed:.6} (closed form) = {by_sum:.6} (sum of members)");
    assert!((closed - by_sum).abs() < 1e-15);
    let total = r.lattice_probability(&Lattice::whole(n));
    assert!((total - 1.0).abs() < 1e-15);
}
