//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::HashMap;

use coreprune::{ModelDims, TokenGrid64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact rational `num / den` with `den > 0`, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i128,
    pub den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl Ratio {
    pub fn int(n: i128) -> Self {
        Ratio { num: n, den: 1 }
    }

    fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "division by zero");
        let s = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Ratio {
            num: s * num / g,
            den: s * den / g,
        }
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    fn sub(self, o: Self) -> Self {
        Self::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    fn mul(self, o: Self) -> Self {
        Self::new(self.num * o.num, self.den * o.den)
    }

    fn div(self, o: Self) -> Self {
        Self::new(self.num * o.den, self.den * o.num)
    }

    /// Exact decimal expansion; panics if `den` has prime factors other than 2 and 5.
    pub fn to_decimal(self) -> String {
        let (mut num, mut den, mut scale) = (self.num, self.den, 0u32);
        // Scale to a power-of-ten denominator, one factor at a time.
        while den != 1 {
            let f = if den % 10 == 0 {
                den /= 10;
                1
            } else if den % 2 == 0 {
                den /= 2;
                5
            } else if den % 5 == 0 {
                den /= 5;
                2
            } else {
                panic!("non-terminating decimal");
            };
            num *= f;
            scale += 1;
        }
        if scale == 0 {
            return num.to_string();
        }
        let neg = num < 0;
        let digits = format!("{:0>width$}", num.abs(), width = scale as usize + 1);
        let (int, frac) = digits.split_at(digits.len() - scale as usize);
        let frac = frac.trim_end_matches('0');
        let sign = if neg { "-" } else { "" };
        if frac.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(i128),
    Var(String),
    Op(char),
}

fn lex(src: &str) -> Vec<Tok> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Tok::Num(
                chars[start..i].iter().collect::<String>().parse().unwrap(),
            ));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Var(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            panic!("unexpected character {c:?} in {src:?}");
        }
    }
    out
}

/// Recursive-descent evaluator for `+ - * / ^ ( )` over integer literals and
/// named variables, in exact rational arithmetic.
struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    env: &'a HashMap<&'a str, i128>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Ratio {
        let mut acc = self.term();
        loop {
            if self.eat('+') {
                acc = acc.add(self.term());
            } else if self.eat('-') {
                acc = acc.sub(self.term());
            } else {
                return acc;
            }
        }
    }

    fn term(&mut self) -> Ratio {
        let mut acc = self.power();
        loop {
            if self.eat('*') {
                acc = acc.mul(self.power());
            } else if self.eat('/') {
                acc = acc.div(self.power());
            } else {
                return acc;
            }
        }
    }

    fn power(&mut self) -> Ratio {
        let base = self.atom();
        if self.eat('^') {
            let Tok::Num(e) = self.toks[self.pos].clone() else {
                panic!("exponent must be an integer literal");
            };
            self.pos += 1;
            (0..e).fold(Ratio::int(1), |acc, _| acc.mul(base))
        } else {
            base
        }
    }

    fn atom(&mut self) -> Ratio {
        if self.eat('(') {
            let v = self.expr();
            assert!(self.eat(')'), "unbalanced parentheses");
            return v;
        }
        let tok = self.toks[self.pos].clone();
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ratio::int(n),
            Tok::Var(name) => Ratio::int(
                *self
                    .env
                    .get(name.as_str())
                    .unwrap_or_else(|| panic!("unbound variable {name}")),
            ),
            Tok::Op(c) => panic!("unexpected operator {c}"),
        }
    }
}

pub fn eval(src: &str, env: &HashMap<&str, i128>) -> Ratio {
    let mut p = Parser {
        toks: lex(src),
        pos: 0,
        env,
    };
    let v = p.expr();
    assert!(p.pos == p.toks.len(), "trailing input in {src:?}");
    v
}

/// Component formulas, transcribed as text.
pub const FORMULA_SEQ: &str = "T_text + T_fixed + Vp";
pub const FORMULA_LM: &str = "L*((3*S*d^2 + 2*S^2*d + S*d^2) + 2*S*d*d_int) + S*d*vocab";
pub const FORMULA_VISION: &str = "L_v*(6*N*d_v^2 + 2*N^2*d_v) + N*d_v*d";
pub const FORMULA_PRUNE: &str = "2*V*d + V*Vp*d/10 + Vp*d";
pub const FORMULA_MASK: &str = "L_d*(12*Q*d_m^2 + 2*Q^2*d_m + 2*Q*Vp*d_m) + Q*d_m*Vp";
pub const FORMULA_TEMPORAL: &str = "L_t*(Q_t*F*d^2 + 4*Q_t*d^2)";
pub const FORMULA_VMTF: &str = "L_f*(T_eff*d*d_f + Vp*d_v*d_f + 2*T_eff*Vp*d_f)";

/// Variable bindings for `dims` plus the workload sizes.
pub fn env_for(dims: &ModelDims, extra: &[(&'static str, u64)]) -> HashMap<&'static str, i128> {
    let mut env: HashMap<&'static str, i128> = [
        ("d", dims.d),
        ("d_int", dims.d_int),
        ("L", dims.layers),
        ("vocab", dims.vocab),
        ("d_v", dims.d_v),
        ("N", dims.n_patches),
        ("L_v", dims.vision_layers),
        ("Q", dims.queries),
        ("d_m", dims.d_m),
        ("L_d", dims.mask_layers),
        ("Q_t", dims.temporal_queries),
        ("L_t", dims.temporal_layers),
        ("d_f", dims.d_f),
        ("L_f", dims.fusion_layers),
        ("T_fixed", dims.fixed_tokens),
    ]
    .into_iter()
    .map(|(k, v)| (k, v as i128))
    .collect();
    for &(k, v) in extra {
        env.insert(k, v as i128);
    }
    env
}

/// Random model sizes small enough that every component stays well below 10^15.
pub fn random_dims(rng: &mut ChaCha8Rng) -> ModelDims {
    ModelDims {
        d: rng.random_range(1..=4096),
        d_int: rng.random_range(1..=16384),
        layers: rng.random_range(0..=48),
        vocab: rng.random_range(1..=65536),
        d_v: rng.random_range(1..=2048),
        n_patches: rng.random_range(1..=1024),
        vision_layers: rng.random_range(0..=32),
        queries: rng.random_range(1..=256),
        d_m: rng.random_range(1..=512),
        mask_layers: rng.random_range(0..=12),
        temporal_queries: rng.random_range(1..=256),
        temporal_layers: rng.random_range(0..=6),
        d_f: rng.random_range(1..=2048),
        fusion_layers: rng.random_range(0..=6),
        fixed_tokens: rng.random_range(0..=200),
    }
}

/// Library value printed with shortest round-trip formatting.
pub fn f64_digits(v: f64) -> String {
    format!("{v}")
}

/// Euclidean distance from `pick_order[t]` to the nearest of the earlier
/// picks, for `t >= 1`, by brute force.
pub fn acquisition_distances(points: &[f64], dim: usize, pick_order: &[usize]) -> Vec<f64> {
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    (1..pick_order.len())
        .map(|t| {
            pick_order[..t]
                .iter()
                .map(|&c| euclid(row(pick_order[t]), row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Max over points of the distance to the nearest center, by brute force.
pub fn brute_radius(points: &[f64], dim: usize, centers: &[usize]) -> f64 {
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    (0..points.len() / dim)
        .map(|i| {
            centers
                .iter()
                .map(|&c| euclid(row(i), row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Uniform grid of shape `w x h x f` with features in `[-1, 1)`.
pub fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, f: usize, d: usize) -> TokenGrid64 {
    let m = w * h * f;
    let emb = (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    TokenGrid64::new(emb, d, w, h, f).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
