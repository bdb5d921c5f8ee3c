use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::{Scalar, Tensor};

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(Cell::get)
}

/// Run `f` with graph recording switched on or off, restoring the previous
/// mode afterwards (also on unwind).
pub fn with_grad_mode<R>(enabled: bool, f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|c| c.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|c| c.replace(enabled)));
    f()
}

/// Evaluate without recording a graph.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    with_grad_mode(false, f)
}

/// Local derivative rule of one recorded op.
///
/// Rules are written with [`Var`] ops themselves, so running them with graph
/// recording on yields differentiable gradients (double backward).
pub(crate) trait Backward<T: Scalar> {
    fn name(&self) -> &'static str;

    /// Gradients for each input given the output gradient. Entries whose
    /// `needs` flag is false may be returned as `None`.
    fn backward(&self, inputs: &[Var<T>], grad: &Var<T>, needs: &[bool]) -> Vec<Option<Var<T>>>;
}

struct GradFn<T: Scalar> {
    op: Box<dyn Backward<T>>,
    inputs: Vec<Var<T>>,
}

struct Node<T: Scalar> {
    id: u64,
    value: Tensor<T>,
    requires_grad: bool,
    grad_fn: Option<GradFn<T>>,
}

/// A tensor value plus (optionally) the op that produced it.
pub struct Var<T: Scalar>(Rc<Node<T>>);

impl<T: Scalar> Clone for Var<T> {
    fn clone(&self) -> Self {
        Var(Rc::clone(&self.0))
    }
}

impl<T: Scalar> fmt::Debug for Var<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = self.0.grad_fn.as_ref().map_or("leaf", |g| g.op.name());
        write!(f, "Var#{}({op}, {:?})", self.0.id, self.0.value)
    }
}

impl<T: Scalar> Var<T> {
    fn make(value: Tensor<T>, requires_grad: bool, grad_fn: Option<GradFn<T>>) -> Self {
        Var(Rc::new(Node { id: next_id(), value, requires_grad, grad_fn }))
    }

    /// A leaf that never receives gradients.
    pub fn constant(value: Tensor<T>) -> Self {
        Self::make(value, false, None)
    }

    /// A leaf that gradients can be taken with respect to.
    pub fn parameter(value: Tensor<T>) -> Self {
        Self::make(value, true, None)
    }

    pub(crate) fn from_op(value: Tensor<T>, op: impl Backward<T> + 'static, inputs: Vec<Var<T>>) -> Self {
        if grad_enabled() && inputs.iter().any(Var::requires_grad) {
            Self::make(value, true, Some(GradFn { op: Box::new(op), inputs }))
        } else {
            Self::constant(value)
        }
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn numel(&self) -> usize {
        self.0.value.numel()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::constant(self.0.value.clone())
    }

    pub fn item(&self) -> T {
        self.0.value.item()
    }
}

/// Gradients of the scalar `output` with respect to each of `wrt`.
///
/// With `create_graph` the returned gradients are themselves recorded and can
/// be differentiated again (needed for gradient penalties). Inputs that do not
/// influence `output` get a zero gradient.
pub fn grad<T: Scalar>(output: &Var<T>, wrt: &[&Var<T>], create_graph: bool) -> Vec<Var<T>> {
    assert_eq!(output.numel(), 1, "grad() needs a scalar output, got shape {:?}", output.shape());
    let seed = Var::constant(Tensor::ones(output.shape().to_vec()));
    grad_with_seed(output, seed, wrt, create_graph)
}

/// Vector-Jacobian product: like [`grad`] but seeded with `seed` (same shape
/// as `output`).
pub fn grad_with_seed<T: Scalar>(output: &Var<T>, seed: Var<T>, wrt: &[&Var<T>], create_graph: bool) -> Vec<Var<T>> {
    assert_eq!(seed.shape(), output.shape(), "seed shape must match output");
    let targets: HashSet<u64> = wrt.iter().map(|v| v.id()).collect();
    let order = topo_order(output);

    // Which nodes lie on a path to one of the targets.
    let mut relevant: HashSet<u64> = HashSet::new();
    for node in &order {
        let hit = targets.contains(&node.id())
            || node.0.grad_fn.as_ref().is_some_and(|g| g.inputs.iter().any(|i| relevant.contains(&i.id())));
        if hit {
            relevant.insert(node.id());
        }
    }

    let mut grads: HashMap<u64, Var<T>> = HashMap::new();
    if relevant.contains(&output.id()) {
        grads.insert(output.id(), seed);
    }

    with_grad_mode(create_graph, || {
        for node in order.iter().rev() {
            let Some(gf) = node.0.grad_fn.as_ref() else { continue };
            let g = if targets.contains(&node.id()) {
                match grads.get(&node.id()) {
                    Some(g) => g.clone(),
                    None => continue,
                }
            } else {
                match grads.remove(&node.id()) {
                    Some(g) => g,
                    None => continue,
                }
            };
            let needs: Vec<bool> = gf.inputs.iter().map(|i| i.requires_grad() && relevant.contains(&i.id())).collect();
            if !needs.iter().any(|&n| n) {
                continue;
            }
            let input_grads = gf.op.backward(&gf.inputs, &g, &needs);
            debug_assert_eq!(input_grads.len(), gf.inputs.len(), "{} returned wrong arity", gf.op.name());
            for ((input, gi), need) in gf.inputs.iter().zip(input_grads).zip(&needs) {
                let (Some(gi), true) = (gi, *need) else { continue };
                debug_assert_eq!(gi.shape(), input.shape(), "{} produced a mis-shaped gradient", gf.op.name());
                let acc = match grads.remove(&input.id()) {
                    Some(prev) => prev.add(&gi),
                    None => gi,
                };
                grads.insert(input.id(), acc);
            }
        }
    });

    wrt.iter()
        .map(|v| grads.get(&v.id()).cloned().unwrap_or_else(|| Var::constant(Tensor::zeros(v.shape().to_vec()))))
        .collect()
}

/// Post-order over the nodes that require grad (inputs before consumers).
fn topo_order<T: Scalar>(root: &Var<T>) -> Vec<Var<T>> {
    let mut order = Vec::new();
    if !root.requires_grad() {
        return order;
    }
    let mut seen: HashSet<u64> = HashSet::new();
    let mut stack: Vec<(Var<T>, bool)> = vec![(root.clone(), false)];
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            order.push(node);
            continue;
        }
        if !seen.insert(node.id()) {
            continue;
        }
        stack.push((node.clone(), true));
        if let Some(gf) = node.0.grad_fn.as_ref() {
            for input in gf.inputs.iter().rev() {
                if input.requires_grad() && !seen.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_do_not_record() {
        let a = Var::constant(Tensor::<f64>::scalar(2.0));
        let b = a.mul(&a);
        assert!(b.is_leaf());
        assert!(!b.requires_grad());
    }

    #[test]
    fn no_grad_suppresses_recording() {
        let p = Var::parameter(Tensor::<f64>::scalar(3.0));
        let y = no_grad(|| p.mul(&p));
        assert!(!y.requires_grad());
        assert!(grad_enabled());
    }

    #[test]
    fn diamond_graph_accumulates() {
        // y = x*x + x  => dy/dx = 2x + 1
        let x = Var::parameter(Tensor::<f64>::scalar(3.0));
        let y = x.mul(&x).add(&x);
        let g = grad(&y, &[&x], false);
        assert_eq!(g[0].item(), 7.0);
    }

    #[test]
    fn second_derivative_through_create_graph() {
        // y = x^3 => y' = 3x^2, y'' = 6x
        let x = Var::parameter(Tensor::<f64>::scalar(2.0));
        let y = x.mul(&x).mul(&x);
        let dy = grad(&y, &[&x], true).remove(0);
        assert_eq!(dy.item(), 12.0);
        assert!(dy.requires_grad());
        let d2 = grad(&dy, &[&x], false).remove(0);
        assert_eq!(d2.item(), 12.0);
    }

    #[test]
    fn unrelated_input_gets_zero() {
        let x = Var::parameter(Tensor::<f64>::new([2], vec![1.0, 2.0]));
        let z = Var::parameter(Tensor::<f64>::new([3], vec![0.0; 3]));
        let y = x.sum();
        let g = grad(&y, &[&x, &z], false);
        assert_eq!(g[1].value().data(), &[0.0; 3]);
    }
}
