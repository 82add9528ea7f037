//! Instance and message counts of a protocol tree, by enumeration only.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceCensus {
    pub n: usize,
    /// Sub-protocols spawned by the top-level instance.
    pub direct_children: u128,
    /// All instances in the tree, the top-level one included.
    pub total_instances: u128,
    /// Messages a full run sends, final result broadcast included.
    pub messages: u128,
    /// Instance count at each recursion depth.
    pub per_depth: Vec<u128>,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

struct Subtree {
    instances: u128,
    /// Messages inside the subtree, excluding how its result leaves it.
    messages: u128,
    per_depth: Vec<u128>,
}

fn subtree(m: usize, memo: &mut Vec<Option<Subtree>>) -> &Subtree {
    if memo[m].is_none() {
        let tree = if m == 2 {
            // shares, A^, B^, reply, output-mask reveal
            Subtree {
                instances: 1,
                messages: 6,
                per_depth: vec![1],
            }
        } else {
            // shares + masked broadcasts + chain values
            let mut messages = (m + m * (m - 1) + m) as u128;
            let mut instances = 1u128;
            let mut per_depth = vec![1u128];
            for t in 1..=m - 2 {
                let ways = binomial(m, t);
                let child = subtree(t + 1, memo);
                instances += ways * child.instances;
                messages += ways * (child.messages + 1);
                if per_depth.len() < child.per_depth.len() + 1 {
                    per_depth.resize(child.per_depth.len() + 1, 0);
                }
                for (d, c) in child.per_depth.iter().enumerate() {
                    per_depth[d + 1] += ways * c;
                }
            }
            Subtree {
                instances,
                messages,
                per_depth,
            }
        };
        memo[m] = Some(tree);
    }
    memo[m].as_ref().expect("just filled")
}

/// Census of an `n`-party run (`n >= 2`) without executing any arithmetic.
///
/// Totals follow `total(2) = 1`, `total(m) = 1 + sum_{t=1}^{m-2} C(m,t) total(t+1)`.
pub fn count_instances(n: usize) -> InstanceCensus {
    assert!(n >= 2, "census needs at least two parties");
    let mut memo: Vec<Option<Subtree>> = (0..=n).map(|_| None).collect();
    let top = subtree(n, &mut memo);
    InstanceCensus {
        n,
        direct_children: if n >= 3 {
            (1u128 << n) - n as u128 - 2
        } else {
            0
        },
        total_instances: top.instances,
        messages: top.messages + n as u128,
        per_depth: top.per_depth.clone(),
    }
}
