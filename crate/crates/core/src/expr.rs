//! Symbols, alphabets, expression trees and their protected evaluation.
//!
//! Trees are evaluated with the usual symbolic-regression protections:
//! division is `x / (y + 1e-100)`, the logarithm and square root act on
//! `|n|`. `exp` is left unprotected; overflow shows up as a non-finite
//! prediction and [`mse_fitness`] maps it to [`WORST_FITNESS`].

use std::fmt;
use std::ops;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset added to every denominator.
pub const DIVISION_EPSILON: f64 = 1e-100;

/// Fitness assigned to candidates whose predictions are not all finite.
pub const WORST_FITNESS: f64 = f64::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Func {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Add,
        Func::Sub,
        Func::Mul,
        Func::Div,
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
    ];

    pub fn arity(self) -> usize {
        match self {
            Func::Add | Func::Sub | Func::Mul | Func::Div => 2,
            Func::Sin | Func::Cos | Func::Exp | Func::Ln | Func::Sqrt => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Add => "+",
            Func::Sub => "-",
            Func::Mul => "*",
            Func::Div => "/",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    /// Accepts the ASCII names plus the typographic aliases `−`, `×`, `÷`, `√`.
    pub fn from_name(token: &str) -> Option<Func> {
        Some(match token {
            "+" => Func::Add,
            "-" | "−" => Func::Sub,
            "*" | "×" => Func::Mul,
            "/" | "÷" => Func::Div,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" | "√" => Func::Sqrt,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply1(self, a: f64) -> f64 {
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Ln => a.abs().ln(),
            Func::Sqrt => a.abs().sqrt(),
            _ => unreachable!("{self:?} is not unary"),
        }
    }

    #[inline]
    pub fn apply2(self, a: f64, b: f64) -> f64 {
        match self {
            Func::Add => a + b,
            Func::Sub => a - b,
            Func::Mul => a * b,
            Func::Div => a / (b + DIVISION_EPSILON),
            _ => unreachable!("{self:?} is not binary"),
        }
    }

    fn is_infix(self) -> bool {
        self.arity() == 2
    }
}

/// A gene symbol: a function or a terminal variable (0-based index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Func(Func),
    Var(usize),
}

impl Symbol {
    pub fn arity(self) -> usize {
        match self {
            Symbol::Func(f) => f.arity(),
            Symbol::Var(_) => 0,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Symbol::Var(_))
    }

    pub fn is_function(self) -> bool {
        matches!(self, Symbol::Func(_))
    }
}

/// Ordered function and terminal sets for one run.
///
/// Index `i < n_functions()` addresses `functions[i]`, the following
/// `n_terminals()` indices address the variables. This order fixes the
/// encoder's output neurons and all argmax tie-breaking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    functions: Vec<Func>,
    var_names: Vec<String>,
}

impl Alphabet {
    /// Variables are named `x1..xn`.
    pub fn new(functions: Vec<Func>, n_vars: usize) -> Result<Self> {
        let names = (1..=n_vars).map(|i| format!("x{i}")).collect();
        Self::with_names(functions, names)
    }

    pub fn with_names(functions: Vec<Func>, var_names: Vec<String>) -> Result<Self> {
        if var_names.is_empty() {
            return Err(Error::Alphabet("terminal set is empty".into()));
        }
        for (i, f) in functions.iter().enumerate() {
            if functions[..i].contains(f) {
                return Err(Error::Alphabet(format!("duplicate function `{}`", f.name())));
            }
        }
        for (i, name) in var_names.iter().enumerate() {
            if var_names[..i].contains(name) {
                return Err(Error::Alphabet(format!("duplicate variable `{name}`")));
            }
            if Func::from_name(name).is_some() {
                return Err(Error::Alphabet(format!("variable `{name}` shadows a function")));
            }
        }
        Ok(Self { functions, var_names })
    }

    /// `{+, -, *, /}`
    pub fn arithmetic(n_vars: usize) -> Result<Self> {
        Self::new(vec![Func::Add, Func::Sub, Func::Mul, Func::Div], n_vars)
    }

    /// `{+, -, *, /, sin, cos, exp, ln}`
    pub fn elementary(n_vars: usize) -> Result<Self> {
        Self::new(
            vec![
                Func::Add,
                Func::Sub,
                Func::Mul,
                Func::Div,
                Func::Sin,
                Func::Cos,
                Func::Exp,
                Func::Ln,
            ],
            n_vars,
        )
    }

    pub fn functions(&self) -> &[Func] {
        &self.functions
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn n_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn n_terminals(&self) -> usize {
        self.var_names.len()
    }

    pub fn len(&self) -> usize {
        self.n_functions() + self.n_terminals()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest function arity, or 0 when the function set is empty.
    pub fn max_arity(&self) -> usize {
        self.functions.iter().map(|f| f.arity()).max().unwrap_or(0)
    }

    pub fn symbol(&self, index: usize) -> Result<Symbol> {
        let nf = self.n_functions();
        if index < nf {
            Ok(Symbol::Func(self.functions[index]))
        } else if index < self.len() {
            Ok(Symbol::Var(index - nf))
        } else {
            Err(Error::Alphabet(format!(
                "symbol id {index} out of range for an alphabet of {} symbols",
                self.len()
            )))
        }
    }

    pub fn arity(&self, index: usize) -> Result<usize> {
        self.symbol(index).map(Symbol::arity)
    }

    pub fn terminal(&self, k: usize) -> Symbol {
        assert!(k < self.n_terminals());
        Symbol::Var(k)
    }

    pub fn index_of(&self, symbol: Symbol) -> Option<usize> {
        match symbol {
            Symbol::Func(f) => self.functions.iter().position(|&g| g == f),
            Symbol::Var(k) if k < self.n_terminals() => Some(self.n_functions() + k),
            Symbol::Var(_) => None,
        }
    }

    pub fn contains(&self, symbol: Symbol) -> bool {
        self.index_of(symbol).is_some()
    }

    pub fn name(&self, symbol: Symbol) -> &str {
        match symbol {
            Symbol::Func(f) => f.name(),
            Symbol::Var(k) => &self.var_names[k],
        }
    }

    pub fn parse_symbol(&self, token: &str) -> Option<Symbol> {
        if let Some(f) = Func::from_name(token) {
            return self.contains(Symbol::Func(f)).then_some(Symbol::Func(f));
        }
        self.var_names.iter().position(|n| n == token).map(Symbol::Var)
    }

    pub fn format_tree(&self, tree: &ExpressionTree) -> String {
        let mut out = String::new();
        tree.write_infix(&mut out, &|k| self.var_names[k].clone(), false);
        out
    }
}

/// Arity-correct expression tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionTree {
    node: Symbol,
    children: Vec<ExpressionTree>,
}

impl ExpressionTree {
    /// Panics if `children.len()` differs from the symbol's arity.
    pub fn new(node: Symbol, children: Vec<ExpressionTree>) -> Self {
        assert_eq!(
            children.len(),
            node.arity(),
            "{node:?} expects {} children",
            node.arity()
        );
        Self { node, children }
    }

    pub fn var(k: usize) -> Self {
        Self::new(Symbol::Var(k), Vec::new())
    }

    pub fn unary(f: Func, arg: Self) -> Self {
        Self::new(Symbol::Func(f), vec![arg])
    }

    pub fn binary(f: Func, lhs: Self, rhs: Self) -> Self {
        Self::new(Symbol::Func(f), vec![lhs, rhs])
    }

    pub fn sin(self) -> Self {
        Self::unary(Func::Sin, self)
    }

    pub fn cos(self) -> Self {
        Self::unary(Func::Cos, self)
    }

    pub fn exp(self) -> Self {
        Self::unary(Func::Exp, self)
    }

    pub fn ln(self) -> Self {
        Self::unary(Func::Ln, self)
    }

    pub fn sqrt(self) -> Self {
        Self::unary(Func::Sqrt, self)
    }

    pub fn node(&self) -> Symbol {
        self.node
    }

    pub fn children(&self) -> &[ExpressionTree] {
        &self.children
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Self::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Self::depth).max().unwrap_or(0)
    }

    /// Pre-order iterator over node symbols.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(self.size());
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t.node);
            stack.extend(t.children.iter().rev());
        }
        out
    }

    /// Highest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.symbols()
            .into_iter()
            .filter_map(|s| match s {
                Symbol::Var(k) => Some(k),
                Symbol::Func(_) => None,
            })
            .max()
    }

    /// Evaluates the tree at `point`. Non-finite results are returned as is.
    pub fn eval(&self, point: &[f64]) -> f64 {
        match self.node {
            Symbol::Var(k) => point[k],
            Symbol::Func(f) => match self.children.as_slice() {
                [a] => f.apply1(a.eval(point)),
                [a, b] => f.apply2(a.eval(point), b.eval(point)),
                _ => unreachable!(),
            },
        }
    }

    fn write_infix(&self, out: &mut String, name: &dyn Fn(usize) -> String, wrap: bool) {
        match self.node {
            Symbol::Var(k) => out.push_str(&name(k)),
            Symbol::Func(f) if f.is_infix() => {
                if wrap {
                    out.push('(');
                }
                self.children[0].write_infix(out, name, true);
                out.push_str(f.name());
                self.children[1].write_infix(out, name, true);
                if wrap {
                    out.push(')');
                }
            }
            Symbol::Func(f) => {
                out.push_str(f.name());
                out.push('(');
                self.children[0].write_infix(out, name, false);
                out.push(')');
            }
        }
    }
}

/// Infix form with explicit parentheses and variables named `x1..xn`,
/// e.g. `sqrt(((x1*x2)-x1)+(x1*sin(x2)))`.
impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.write_infix(&mut out, &|k| format!("x{}", k + 1), false);
        f.write_str(&out)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $func:expr) => {
        impl ops::$trait for ExpressionTree {
            type Output = ExpressionTree;
            fn $method(self, rhs: ExpressionTree) -> ExpressionTree {
                ExpressionTree::binary($func, self, rhs)
            }
        }
    };
}

binary_op!(Add, add, Func::Add);
binary_op!(Sub, sub, Func::Sub);
binary_op!(Mul, mul, Func::Mul);
binary_op!(Div, div, Func::Div);

/// Input points (row-major, `n_vars` columns) with one target per point.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n_vars: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(n_vars: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::Usage("dataset needs at least one input variable".into()));
        }
        if inputs.len() != targets.len() * n_vars {
            return Err(Error::Dimension {
                expected: targets.len() * n_vars,
                found: inputs.len(),
            });
        }
        if let Some(i) = inputs.iter().chain(&targets).position(|v| !v.is_finite()) {
            return Err(Error::Usage(format!("dataset value #{i} is not finite")));
        }
        Ok(Self {
            n_vars,
            inputs,
            targets,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let n_vars = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_vars) {
            return Err(Error::Usage(format!(
                "row {bad} has {} values, expected {n_vars}",
                rows[bad].len()
            )));
        }
        Self::new(n_vars, rows.concat(), targets)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_vars..(i + 1) * self.n_vars]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.n_vars)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Subset of rows in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.n_vars);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            n_vars: self.n_vars,
            inputs,
            targets,
        }
    }
}

/// Mean squared error of `tree` over `data`.
///
/// Returns [`WORST_FITNESS`] when any prediction (or the mean itself) is
/// not finite.
pub fn mse_fitness(tree: &ExpressionTree, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Usage("mse over an empty dataset".into()));
    }
    let mut sum = 0.0;
    for (x, &t) in data.rows().zip(data.targets()) {
        let y = tree.eval(x);
        if !y.is_finite() {
            return Ok(WORST_FITNESS);
        }
        let r = y - t;
        sum += r * r;
    }
    let mse = sum / data.len() as f64;
    Ok(if mse.is_finite() { mse } else { WORST_FITNESS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(k: usize) -> ExpressionTree {
        ExpressionTree::var(k)
    }

    #[test]
    fn arities() {
        let a = Alphabet::elementary(3).unwrap();
        assert_eq!(a.arity(0).unwrap(), 2); // '+'
        assert_eq!(a.symbol(4).unwrap(), Symbol::Func(Func::Sin));
        assert_eq!(a.arity(4).unwrap(), 1);
        assert_eq!(a.arity(10).unwrap(), 0); // x3
        assert!(matches!(a.arity(11), Err(Error::Alphabet(_))));
    }

    #[test]
    fn alphabet_rejects_bad_sets() {
        assert!(Alphabet::new(vec![Func::Add], 0).is_err());
        assert!(Alphabet::new(vec![Func::Add, Func::Add], 1).is_err());
        assert!(Alphabet::with_names(vec![], vec!["sin".into()]).is_err());
    }

    #[test]
    fn protected_division_by_zero() {
        let t = x(0) / x(1);
        assert_eq!(t.eval(&[1.0, 0.0]), 1e100);
        assert_eq!(t.eval(&[-3.5, 0.0]), -3.5 * 1e100);
    }

    #[test]
    fn plain_arithmetic() {
        assert_eq!((x(0) + x(1)).eval(&[2.0, 3.0]), 5.0);
        assert_eq!(x(0).ln().eval(&[-1.0]), 0.0);
        assert_eq!(x(0).sqrt().eval(&[-4.0]), 2.0);
    }

    #[test]
    fn exp_overflow_propagates() {
        let t = x(0).exp().exp();
        assert_eq!(t.eval(&[1000.0]), f64::INFINITY);
        let data = Dataset::new(1, vec![1000.0], vec![0.0]).unwrap();
        assert_eq!(mse_fitness(&t, &data).unwrap(), WORST_FITNESS);
    }

    #[test]
    fn mse_of_constant_tree() {
        // x1 - x1 + x1/x1 is the constant 1 on nonzero inputs.
        let one = (x(0) - x(0)) + x(0) / x(0);
        let inputs = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let targets = vec![0.5, -1.0, 2.0, 4.0, 1.0];
        let data = Dataset::new(1, inputs, targets.clone()).unwrap();
        let oracle = targets.iter().map(|t| (1.0 - t) * (1.0 - t)).sum::<f64>() / 5.0;
        assert_eq!(mse_fitness(&one, &data).unwrap(), oracle);
    }

    #[test]
    fn mse_perfect_fit_is_zero() {
        let t = x(0) * x(1) + x(0).sin();
        let rows: [Vec<f64>; 3] = [vec![0.3, 1.0], vec![-2.0, 0.5], vec![1.5, 1.5]];
        let targets = rows.iter().map(|r| r[0] * r[1] + r[0].sin()).collect();
        let data = Dataset::from_rows(&rows, targets).unwrap();
        assert_eq!(mse_fitness(&t, &data).unwrap(), 0.0);
    }

    #[test]
    fn mse_empty_dataset_is_usage_error() {
        let data = Dataset::new(1, vec![], vec![]).unwrap();
        assert!(matches!(mse_fitness(&x(0), &data), Err(Error::Usage(_))));
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(2, vec![1.0, 2.0, 3.0], vec![1.0]).is_err());
        assert!(Dataset::new(1, vec![f64::NAN], vec![1.0]).is_err());
        let d = Dataset::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0]).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.select(&[1]).targets(), &[6.0]);
    }

    #[test]
    fn infix_printing() {
        let t = ((x(0) * x(1)) - x(0) + x(0) * x(1).sin()).sqrt();
        assert_eq!(t.to_string(), "sqrt(((x1*x2)-x1)+(x1*sin(x2)))");
        let a = Alphabet::with_names(vec![Func::Sqrt], vec!["x".into(), "y".into()]).unwrap();
        assert_eq!(a.format_tree(&t), "sqrt(((x*y)-x)+(x*sin(y)))");
        assert_eq!(x(2).to_string(), "x3");
    }

    #[test]
    fn symbol_parsing() {
        let a = Alphabet::elementary(2).unwrap();
        assert_eq!(a.parse_symbol("−"), Some(Symbol::Func(Func::Sub)));
        assert_eq!(a.parse_symbol("x2"), Some(Symbol::Var(1)));
        assert_eq!(a.parse_symbol("sqrt"), None);
        assert_eq!(a.parse_symbol("x3"), None);
    }
}
