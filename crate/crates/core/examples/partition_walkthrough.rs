// Splitting a lattice into cells by the status of its low-level states.
//
// Five components; component 1 fails on its own, and the pairs {2,3} and
// {3,4} fail. The level-1 split peels off [{1}, {1,2,3,4,5}] and leaves the
// 1-normal lattice [{}, {2,3,4,5}], which the level-2 split then cuts into
// failure lattices, a 1-normal cell and a normal remainder.

use lattice_reliability::partition::choose_order;
use lattice_reliability::{
    partition_by_level1, partition_by_level2, ColumnOrder, ComponentReliability, Lattice,
    PartitionResult, SystemState,
};

fn show(title: &str, p: &PartitionResult, r: &ComponentReliability) {
    println!("{title}");
    let groups = [
        ("failure", &p.failure_lattices),
        ("1-normal", &p.one_normal_lattices),
        ("normal", &p.normal_lattices),
    ];
    for (kind, cells) in groups {
        for c in cells.iter() {
            println!("  {kind:<9} {c:<24} mass {:.6}", r.lattice_probability(c));
        }
    }
}

fn main() {
    let n = 5;
    let r = ComponentReliability::uniform(n, 0.1).unwrap();
    let space = Lattice::whole(n);

    let level1 = partition_by_level1(&space, &ColumnOrder::ascending(&space), 1, 1).unwrap();
    show("level-1 split of the whole space", &level1, &r);

    let rest = level1.one_normal_lattices[0].clone();
    let pairs = [
        SystemState::from_ids(n, [2, 3]).unwrap(),
        SystemState::from_ids(n, [3, 4]).unwrap(),
    ];
    let order = choose_order(&rest, &pairs);
    let cols: Vec<String> = order
        .as_slice()
        .iter()
        .map(|c| c.get().to_string())
        .collect();
    println!("column order for {rest}: {}", cols.join(","));
    let level2 = partition_by_level2(&rest, &order, &pairs).unwrap();
    show(&format!("level-2 split of {rest}"), &level2, &r);

    // The cells tile the input exactly.
    let cells: Vec<&Lattice> = level2.cells().collect();
    for (i, x) in cells.iter().enumerate() {
        for y in &cells[i + 1..] {
            assert!(!x.intersects(y), "{x} and {y} overlap");
        }
    }
    let mass: f64 = cells.iter().map(|c| r.lattice_probability(c)).sum();
    assert!((mass - r.lattice_probability(&rest)).abs() < 1e-15);
    println!("{} cells, total mass {mass:.6} = P({rest})", cells.len());
}
