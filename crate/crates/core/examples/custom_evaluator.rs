// Plugging in your own structure function.
//
// A water network: a source, a sink and six pipes. The system fails when no
// path of working pipes connects source to sink. Any monotone rule works;
// it only has to implement `Evaluator`.

use lattice_reliability::{
    brute_force_oracle, ComponentReliability, Criteria, Csilp, Evaluation, Evaluator,
    EvaluatorError, StateStatus, SystemState,
};

struct TwoTerminal {
    nodes: usize,
    // (from, to) per pipe; pipe i is component i + 1.
    pipes: Vec<(usize, usize)>,
}

impl Evaluator for TwoTerminal {
    fn components(&self) -> usize {
        self.pipes.len()
    }

    fn evaluate(&self, state: &SystemState) -> Result<Evaluation, EvaluatorError> {
        if state.width() != self.pipes.len() {
            return Err(EvaluatorError::Width {
                expected: self.pipes.len(),
                got: state.width(),
            });
        }
        let failed = state.id_vec();
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (i, &(a, b)) in self.pipes.iter().enumerate() {
                if failed.contains(&(i + 1)) {
                    continue;
                }
                for (x, y) in [(a, b), (b, a)] {
                    if x == u && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        let connected = seen[self.nodes - 1];
        Ok(Evaluation {
            status: if connected {
                StateStatus::Normal
            } else {
                StateStatus::Failure
            },
            shed: if connected { 0.0 } else { 1.0 },
        })
    }

    fn kind(&self) -> &'static str {
        "two-terminal"
    }
}

fn main() {
    // 0 = source, 3 = sink: a bridge network.
    let net = TwoTerminal {
        nodes: 4,
        pipes: vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (0, 3)],
    };
    let r = ComponentReliability::new(vec![0.05, 0.05, 0.02, 0.05, 0.05, 0.2]).unwrap();
    let run = Csilp::new(&net, &r)
        .criteria(Criteria::complete())
        .run()
        .unwrap();
    println!(
        "unavailability {:.8} after {} evaluations",
        run.lolp(),
        run.evaluations
    );
    println!("minimal cut sets:");
    for rec in &run.records {
        println!(
            "  pipes {:?}  contributes {:.3e}",
            rec.state.id_vec(),
            rec.delta_lolp
        );
    }
    let exact = brute_force_oracle(&net, &r, 1).unwrap();
    assert!((exact.lolp_exact - run.lolp()).abs() < 1e-12);
    println!("exhaustive check used {} evaluations", exact.evaluations);
}
