//! Progressive orbit selection: the next state is drawn while the orbit is built,
//! keeping only a running log-normalizer and one candidate index.

use crate::math::{axpy_into, log_add_exp};
use crate::orbit::{DoublingRule, Termination};
use crate::rng::RngStream;
use crate::target::TargetDensity;

/// Supplies doubling directions and selection uniforms.
pub trait SelectionSource {
    /// Doubling direction, `true` = forward.
    fn bit(&mut self) -> bool;
    fn uniform(&mut self) -> f64;
}

impl SelectionSource for RngStream {
    fn bit(&mut self) -> bool {
        RngStream::bit(self)
    }

    fn uniform(&mut self) -> f64 {
        RngStream::uniform(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgressiveOutcome {
    /// Selected lattice index relative to the start point.
    pub index: i64,
    pub selected_log_weight: f64,
    pub left_steps: u64,
    pub right_steps: u64,
    pub log_normalizer: f64,
    pub doublings: u32,
    pub termination: Termination,
    pub bits: Vec<bool>,
}

impl ProgressiveOutcome {
    pub fn size(&self) -> u64 {
        self.left_steps + self.right_steps + 1
    }
}

/// A node of the halving tree over an extension: a contiguous block of points
/// in walk order together with a candidate drawn proportionally within it.
#[derive(Clone, Copy, Debug)]
struct Node {
    lse: f64,
    first: f64,
    last: f64,
    size: u64,
    cand: i64,
    cand_w: f64,
}

/// Draw `(1-q) * left + q * right` where `q = exp(right.lse - merged)`.
fn merge<S: SelectionSource + ?Sized>(l: Node, r: Node, src: &mut S) -> Node {
    let lse = log_add_exp(l.lse, r.lse);
    let u = src.uniform();
    let take_right = u < (r.lse - lse).exp();
    let (cand, cand_w) = if take_right { (r.cand, r.cand_w) } else { (l.cand, l.cand_w) };
    Node {
        lse,
        first: l.first,
        last: r.last,
        size: l.size + r.size,
        cand,
        cand_w,
    }
}

/// Builds the orbit from `start` and selects a point from it with probability
/// proportional to the target, without storing the orbit.
///
/// Each extension is walked outward from the current endpoint. Blocks of the
/// halving tree are merged as soon as they complete, so the sub-stopping check
/// aborts at the first stopping block and at most `M + 1` nodes are alive.
pub fn progressive_select<T: TargetDensity + ?Sized, S: SelectionSource + ?Sized>(
    target: &T,
    start: &[f64],
    start_log_weight: Option<f64>,
    rho: &[f64],
    rule: &DoublingRule,
    src: &mut S,
) -> ProgressiveOutcome {
    let h = rule.spacing;
    let log_eh = rule.threshold.ln() + h.ln();
    let checks = log_eh > f64::NEG_INFINITY;
    let node_stops = |n: &Node| checks && n.first.max(n.last) <= log_eh + n.lse;
    let w0 = start_log_weight.unwrap_or_else(|| target.log_density(start));

    let mut total = w0;
    let (mut cand, mut cand_w) = (0i64, w0);
    let (mut left_w, mut right_w) = (w0, w0);
    let (mut left, mut right) = (0u64, 0u64);
    let mut bits = Vec::new();
    let mut termination = Termination::MaxDoublings;
    let mut buf = vec![0.0; start.len()];
    let mut stack: Vec<Node> = Vec::with_capacity(rule.max_doublings as usize + 1);

    'doubling: for _ in 0..rule.max_doublings {
        let forward = src.bit();
        bits.push(forward);
        let n = left + right + 1;
        stack.clear();
        for j in 1..=n {
            let idx = if forward { (right + j) as i64 } else { -((left + j) as i64) };
            axpy_into(start, idx as f64 * h, rho, &mut buf);
            let w = target.log_density(&buf);
            let mut node = Node {
                lse: w,
                first: w,
                last: w,
                size: 1,
                cand: idx,
                cand_w: w,
            };
            if rule.include_singletons && node_stops(&node) {
                termination = Termination::ExtensionSubStopped;
                break 'doubling;
            }
            while stack.last().is_some_and(|top| top.size == node.size) {
                let prev = stack.pop().expect("checked non-empty");
                node = merge(prev, node, src);
                if node_stops(&node) {
                    termination = Termination::ExtensionSubStopped;
                    break 'doubling;
                }
            }
            stack.push(node);
        }
        let ext = stack.pop().expect("an extension has at least one point");
        debug_assert!(stack.is_empty());

        let merged = log_add_exp(total, ext.lse);
        if src.uniform() < (ext.lse - merged).exp() {
            cand = ext.cand;
            cand_w = ext.cand_w;
        }
        total = merged;
        // `ext.last` is the outermost point of the walk
        if forward {
            right += n;
            right_w = ext.last;
        } else {
            left += n;
            left_w = ext.last;
        }
        if left_w.max(right_w) <= log_eh + total {
            termination = Termination::Stopped;
            break;
        }
    }

    ProgressiveOutcome {
        index: cand,
        selected_log_weight: cand_w,
        left_steps: left,
        right_steps: right,
        log_normalizer: total,
        doublings: (left + right + 1).trailing_zeros(),
        termination,
        bits,
    }
}
