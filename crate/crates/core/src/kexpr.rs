//! Fixed-length K-expression genes and their breadth-first decoding.
//!
//! A gene is a head of `h` symbols (functions or terminals) followed by a
//! tail of `t = h * (a_max - 1) + 1` terminals. That tail length guarantees
//! every gene decodes to a complete tree, whatever the head holds.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::{Alphabet, ExpressionTree, Symbol};

/// Tail length for head length `h` over `alphabet`.
pub fn tail_len(head_len: usize, alphabet: &Alphabet) -> usize {
    // Alphabets without functions still get a one-symbol tail.
    let a_max = alphabet.max_arity().max(1);
    head_len * (a_max - 1) + 1
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Gene {
    symbols: Vec<Symbol>,
    head_len: usize,
}

impl Gene {
    /// Builds a gene and checks it against `alphabet`.
    pub fn new(symbols: Vec<Symbol>, head_len: usize, alphabet: &Alphabet) -> Result<Self> {
        let gene = Self { symbols, head_len };
        gene.validate(alphabet)?;
        Ok(gene)
    }

    /// Skips validation; callers guarantee the head/tail rules.
    pub(crate) fn from_parts(symbols: Vec<Symbol>, head_len: usize) -> Self {
        Self { symbols, head_len }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.symbols
    }

    pub fn head_len(&self) -> usize {
        self.head_len
    }

    pub fn tail_len(&self) -> usize {
        self.symbols.len() - self.head_len
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn head(&self) -> &[Symbol] {
        &self.symbols[..self.head_len]
    }

    pub fn tail(&self) -> &[Symbol] {
        &self.symbols[self.head_len..]
    }

    pub fn validate(&self, alphabet: &Alphabet) -> Result<()> {
        if self.head_len == 0 {
            return Err(Error::InvalidGene("head length must be at least 1".into()));
        }
        let expected = self.head_len + tail_len(self.head_len, alphabet);
        if self.symbols.len() != expected {
            return Err(Error::InvalidGene(format!(
                "length {} does not match head {} + tail {}",
                self.symbols.len(),
                self.head_len,
                expected - self.head_len
            )));
        }
        if let Some(i) = self.symbols.iter().position(|&s| !alphabet.contains(s)) {
            return Err(Error::InvalidGene(format!(
                "symbol {:?} at position {} is not in the alphabet",
                self.symbols[i],
                i + 1
            )));
        }
        if let Some(i) = self.tail().iter().position(|s| s.is_function()) {
            return Err(Error::InvalidGene(format!(
                "function in tail at position {}",
                self.head_len + i + 1
            )));
        }
        Ok(())
    }

    /// Parses a whitespace-separated symbol string. The head length is
    /// inferred from the total length when not given.
    pub fn parse(text: &str, head_len: Option<usize>, alphabet: &Alphabet) -> Result<Self> {
        let symbols = parse_symbols(text, alphabet)?;
        let head_len = match head_len {
            Some(h) => h,
            None => infer_head_len(symbols.len(), alphabet).ok_or_else(|| {
                Error::InvalidGene(format!("no head length yields a gene of {} symbols", symbols.len()))
            })?,
        };
        Self::new(symbols, head_len, alphabet)
    }

    pub fn to_text(&self, alphabet: &Alphabet) -> String {
        self.symbols
            .iter()
            .map(|&s| alphabet.name(s))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Tokenizes a symbol string, reporting the 0-based index of the first
/// token that is not in `alphabet`.
pub fn parse_symbols(text: &str, alphabet: &Alphabet) -> Result<Vec<Symbol>> {
    text.split_whitespace()
        .enumerate()
        .map(|(index, token)| {
            alphabet.parse_symbol(token).ok_or_else(|| Error::Parse {
                index,
                token: token.to_string(),
            })
        })
        .collect()
}

/// Head length `h` with `h + tail_len(h) == len`, if one exists.
pub fn infer_head_len(len: usize, alphabet: &Alphabet) -> Option<usize> {
    let a = alphabet.max_arity().max(1);
    // len = h * a + 1
    (len > 1 && (len - 1).is_multiple_of(a)).then(|| (len - 1) / a)
}

/// Breadth-first (Karva) decoding of `symbols`. Returns the tree and the
/// number of symbols consumed, or `None` if the string ends before every
/// open argument is filled.
pub fn decode_symbols(symbols: &[Symbol]) -> Option<(ExpressionTree, usize)> {
    if symbols.is_empty() {
        return None;
    }
    // first_child[i] = index of node i's first child; its children are contiguous.
    let mut first_child = vec![0usize; symbols.len()];
    let mut queue = VecDeque::from([0usize]);
    let mut next = 1usize;
    while let Some(i) = queue.pop_front() {
        let arity = symbols[i].arity();
        first_child[i] = next;
        for _ in 0..arity {
            if next >= symbols.len() {
                return None;
            }
            queue.push_back(next);
            next += 1;
        }
    }
    Some((build(symbols, &first_child, 0), next))
}

fn build(symbols: &[Symbol], first_child: &[usize], i: usize) -> ExpressionTree {
    let start = first_child[i];
    let children = (start..start + symbols[i].arity())
        .map(|c| build(symbols, first_child, c))
        .collect();
    ExpressionTree::new(symbols[i], children)
}

/// Decodes a valid gene. Trailing symbols past the effective length are ignored.
pub fn decode(gene: &Gene) -> ExpressionTree {
    decode_symbols(gene.symbols()).expect("valid genes always decode").0
}

/// Number of symbols consumed by [`decode`].
pub fn effective_length(gene: &Gene) -> usize {
    let mut open = 1usize;
    for (i, s) in gene.symbols().iter().enumerate() {
        open = open - 1 + s.arity();
        if open == 0 {
            return i + 1;
        }
    }
    unreachable!("valid genes always terminate")
}

/// Uniform random gene: head symbols from the whole alphabet, tail symbols
/// from the terminals.
pub fn random_gene<R: Rng + ?Sized>(rng: &mut R, head_len: usize, alphabet: &Alphabet) -> Gene {
    assert!(head_len >= 1, "head length must be at least 1");
    let t = tail_len(head_len, alphabet);
    let mut symbols = Vec::with_capacity(head_len + t);
    for _ in 0..head_len {
        symbols.push(random_head_symbol(rng, alphabet));
    }
    for _ in 0..t {
        symbols.push(random_terminal(rng, alphabet));
    }
    Gene::from_parts(symbols, head_len)
}

pub(crate) fn random_head_symbol<R: Rng + ?Sized>(rng: &mut R, alphabet: &Alphabet) -> Symbol {
    alphabet
        .symbol(rng.random_range(0..alphabet.len()))
        .expect("index in range")
}

pub(crate) fn random_terminal<R: Rng + ?Sized>(rng: &mut R, alphabet: &Alphabet) -> Symbol {
    alphabet.terminal(rng.random_range(0..alphabet.n_terminals()))
}
