//! Anytime max-sum joint action selection.

use super::factored::{FactoredQ, JointAction};

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-round record of a max-sum run.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxSumTrace {
    pub action: JointAction,
    pub value: f64,
    /// Best value retained after each round.
    pub best_per_round: Vec<f64>,
}

/// Greedy joint action by synchronous max-sum; see [`greedy_action_trace`].
pub fn greedy_action(fq: &FactoredQ, iterations: usize) -> JointAction {
    greedy_action_trace(fq, iterations).action
}

/// Runs `iterations` rounds (at least one) of synchronous max-sum with
/// mean-normalized messages. After each round every agent picks the argmax of
/// its utility plus incoming messages (lowest index on ties); the candidate
/// with the highest `evaluate_q` seen so far is kept.
pub fn greedy_action_trace(fq: &FactoredQ, iterations: usize) -> MaxSumTrace {
    let n = fq.n();
    let wu = fq.utility_weight();
    let wp = fq.payoff_weight();
    let local: Vec<Vec<f64>> = fq
        .utilities()
        .iter()
        .map(|u| u.iter().map(|v| wu * v).collect())
        .collect();

    if fq.edges().is_empty() {
        let action = JointAction(local.iter().map(|u| argmax(u)).collect());
        let value = fq.evaluate_q(&action).expect("valid action");
        return MaxSumTrace {
            action,
            value,
            best_per_round: vec![value; iterations.max(1)],
        };
    }

    // msgs[e].0: i → j over a_j; msgs[e].1: j → i over a_i
    let mut msgs: Vec<(Vec<f64>, Vec<f64>)> = fq
        .edges()
        .iter()
        .map(|&(i, j)| (vec![0.0; fq.action_count(j)], vec![0.0; fq.action_count(i)]))
        .collect();
    let mut best: Option<(JointAction, f64)> = None;
    let mut best_per_round = Vec::with_capacity(iterations.max(1));

    for _ in 0..iterations.max(1) {
        let mut belief = local.clone();
        for (e, &(i, j)) in fq.edges().iter().enumerate() {
            for (b, m) in belief[j].iter_mut().zip(&msgs[e].0) {
                *b += m;
            }
            for (b, m) in belief[i].iter_mut().zip(&msgs[e].1) {
                *b += m;
            }
        }
        let mut next = Vec::with_capacity(msgs.len());
        for (e, &(i, j)) in fq.edges().iter().enumerate() {
            let (ni, nj) = (fq.action_count(i), fq.action_count(j));
            let mut to_j = vec![f64::NEG_INFINITY; nj];
            let mut to_i = vec![f64::NEG_INFINITY; ni];
            for ai in 0..ni {
                let from_i = belief[i][ai] - msgs[e].1[ai];
                for aj in 0..nj {
                    let pair = wp * fq.pair_value(e, ai, aj);
                    let from_j = belief[j][aj] - msgs[e].0[aj];
                    to_j[aj] = to_j[aj].max(from_i + pair);
                    to_i[ai] = to_i[ai].max(from_j + pair);
                }
            }
            center(&mut to_j);
            center(&mut to_i);
            next.push((to_j, to_i));
        }
        msgs = next;

        let mut belief = local.clone();
        for (e, &(i, j)) in fq.edges().iter().enumerate() {
            for (b, m) in belief[j].iter_mut().zip(&msgs[e].0) {
                *b += m;
            }
            for (b, m) in belief[i].iter_mut().zip(&msgs[e].1) {
                *b += m;
            }
        }
        let candidate = JointAction((0..n).map(|i| argmax(&belief[i])).collect());
        let value = fq.evaluate_q(&candidate).expect("valid action");
        if best.as_ref().map_or(true, |(_, v)| value > *v) {
            best = Some((candidate, value));
        }
        best_per_round.push(best.as_ref().expect("set").1);
    }
    let (action, value) = best.expect("at least one round");
    MaxSumTrace {
        action,
        value,
        best_per_round,
    }
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}
