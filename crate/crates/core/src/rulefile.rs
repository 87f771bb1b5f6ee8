//! Versioned text serialization of treatment rules.
//!
//! One record per line, whitespace-separated tokens, reals written with 17 significant digits so
//! every `f64` round-trips exactly. Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! ivpile-rule 1
//! kind kernel-expansion
//! kernel gaussian 2.5000000000000000e0
//! beta0 -1.2000000000000000e-1
//! support 2 10
//! sv <alpha> <x_1> ... <x_d>
//! ...
//! end
//! ```
//!
//! Plug-in rules embed the fitted nuisance model (forest trees or logistic coefficients).

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;

use crate::bounds::BoundMethod;
use crate::error::{Error, Result};
use crate::nuisance::forest::{Node, Tree};
use crate::nuisance::{
    Classifier, ContinuousNuisanceModel, JointProbModel, LinearRegression, MultinomialLogit, NuisanceModel,
    RandomForest, Regressor,
};
use crate::wsvm::{KernelExpansion, KernelSpec, TreatmentRule};

pub const MAGIC: &str = "ivpile-rule";
pub const VERSION: u32 = 1;

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals(vs: &[f64]) -> String {
    vs.iter().map(|&v| real(v)).collect::<Vec<_>>().join(" ")
}

struct Writer {
    out: String,
}

impl Writer {
    fn line(&mut self, s: impl AsRef<str>) {
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    fn kernel(&mut self, k: &KernelSpec) {
        match k {
            KernelSpec::Gaussian { sigma } => self.line(format!("kernel gaussian {}", real(*sigma))),
            KernelSpec::Linear => self.line("kernel linear"),
        }
    }

    fn forest(&mut self, f: &RandomForest) {
        self.line(format!(
            "forest {} {} {} {} {}",
            f.trees.len(),
            f.width,
            u8::from(f.classification),
            real(f.range.0),
            real(f.range.1)
        ));
        for t in &f.trees {
            self.line(format!("tree {} {}", t.nodes.len(), t.values.len()));
            for n in &t.nodes {
                match *n {
                    Node::Leaf(off) => self.line(format!("leaf {off}")),
                    Node::Split { feature, threshold, left, right } => {
                        self.line(format!("split {feature} {} {left} {right}", real(threshold)))
                    }
                }
            }
            self.line(format!("values {}", reals(&t.values)));
        }
    }

    fn logit(&mut self, m: &MultinomialLogit) {
        let (c, p) = m.coef.dim();
        self.line(format!("logit {c} {} {} {}", p - 1, u8::from(m.converged), m.iterations));
        self.line(format!("center {}", reals(&m.center)));
        self.line(format!("scale {}", reals(&m.scale)));
        for row in m.coef.rows() {
            self.line(format!("coef {}", reals(row.as_slice().expect("standard layout"))));
        }
        self.line(format!("trace {} {}", m.objective_trace.len(), reals(&m.objective_trace)));
    }

    fn classifier(&mut self, c: &Classifier) {
        match c {
            Classifier::Logit(m) => self.logit(m),
            Classifier::Forest(f) => self.forest(f),
        }
    }

    fn regressor(&mut self, r: &Regressor) {
        match r {
            Regressor::Linear(m) => {
                self.line(format!("linear {} {} {}", m.center.len(), real(m.range.0), real(m.range.1)));
                self.line(format!("center {}", reals(&m.center)));
                self.line(format!("scale {}", reals(&m.scale)));
                self.line(format!("coef {}", reals(&m.coef)));
            }
            Regressor::Forest(f) => self.forest(f),
        }
    }

    fn nuisance(&mut self, m: &NuisanceModel) {
        match m {
            NuisanceModel::Joint(j) => {
                self.line("nuisance joint");
                for arm in &j.arms {
                    self.classifier(arm);
                }
            }
            NuisanceModel::Continuous(c) => {
                self.line(format!("nuisance continuous {} {}", real(c.k0), real(c.k1)));
                for row in &c.mu {
                    for r in row {
                        self.regressor(r);
                    }
                }
                for p in &c.pa {
                    self.classifier(p);
                }
                self.classifier(&c.pz);
            }
        }
    }
}

/// Serializes a rule to text.
pub fn to_string(rule: &TreatmentRule) -> String {
    let mut w = Writer { out: String::new() };
    w.line(format!("{MAGIC} {VERSION}"));
    w.line(format!("kind {}", rule.kind_name()));
    match rule {
        TreatmentRule::KernelExpansion(k) => {
            w.kernel(&k.kernel);
            w.line(format!("beta0 {}", real(k.beta0)));
            w.line(format!("support {} {}", k.alphas.len(), k.support.ncols()));
            for (a, row) in k.alphas.iter().zip(k.support.rows()) {
                let mut s = format!("sv {}", real(*a));
                for v in row {
                    let _ = write!(s, " {}", real(*v));
                }
                w.line(s);
            }
        }
        TreatmentRule::PlugIn(p) => {
            match p.method {
                BoundMethod::ManskiPepper { k0, k1 } => w.line(format!("bound mp {} {}", real(k0), real(k1))),
                m => w.line(format!("bound {}", m.name())),
            }
            w.line(format!("delta {}", real(p.delta)));
            w.nuisance(&p.model);
        }
        TreatmentRule::Constant(s) => w.line(format!("value {}", real(*s))),
        TreatmentRule::CoinFlip { seed } => w.line(format!("seed {seed}")),
    }
    w.line("end");
    w.out
}

pub fn save(rule: &TreatmentRule, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(rule)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<TreatmentRule> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

struct Reader<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    at: usize,
    /// Line of the record most recently examined, for error messages.
    cur: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .map(|(i, l)| (i, l.split_whitespace().collect()))
            .collect();
        Reader { lines, at: 0, cur: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format { line: self.cur, message: msg.into() }
    }

    fn peek_key(&mut self) -> Option<&'a str> {
        self.touch();
        self.lines.get(self.at).map(|l| l.1[0])
    }

    fn touch(&mut self) {
        self.cur = self.lines.get(self.at).or(self.lines.last()).map_or(0, |l| l.0);
    }

    /// Next record, which must start with `key`; returns its remaining tokens.
    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        self.touch();
        match self.lines.get(self.at) {
            Some((_, toks)) if toks[0] == key => {
                self.at += 1;
                Ok(toks[1..].to_vec())
            }
            Some((_, toks)) => Err(self.err(format!("expected `{key}`, found `{}`", toks[0]))),
            None => Err(self.err(format!("expected `{key}`, found end of input"))),
        }
    }

    fn f(&self, tok: &str) -> Result<f64> {
        tok.parse::<f64>().map_err(|_| self.err(format!("`{tok}` is not a real number")))
    }

    fn u(&self, tok: &str) -> Result<usize> {
        tok.parse::<usize>().map_err(|_| self.err(format!("`{tok}` is not a count")))
    }

    fn arity<'t>(&self, toks: &'t [&'a str], n: usize, what: &str) -> Result<&'t [&'a str]> {
        if toks.len() != n {
            return Err(self.err(format!("`{what}` needs {n} fields, found {}", toks.len())));
        }
        Ok(toks)
    }

    /// Record `key` holding exactly `n` reals (`None` accepts any count).
    fn reals(&mut self, key: &str, n: Option<usize>) -> Result<Vec<f64>> {
        let toks = self.expect(key)?;
        if let Some(n) = n {
            self.arity(&toks, n, key)?;
        }
        toks.iter().map(|t| self.f(t)).collect()
    }

    fn kernel(&mut self) -> Result<KernelSpec> {
        let t = self.expect("kernel")?;
        match t.first().copied() {
            Some("gaussian") if t.len() == 2 => {
                let s = self.f(t[1])?;
                KernelSpec::gaussian(s).map_err(|e| self.err(e.to_string()))
            }
            Some("linear") if t.len() == 1 => Ok(KernelSpec::Linear),
            _ => Err(self.err("unknown kernel")),
        }
    }

    fn forest(&mut self) -> Result<RandomForest> {
        let h = self.expect("forest")?;
        let h = self.arity(&h, 5, "forest")?.to_vec();
        let (n_trees, width) = (self.u(h[0])?, self.u(h[1])?);
        let classification = match h[2] {
            "0" => false,
            "1" => true,
            _ => return Err(self.err("forest task flag must be 0 or 1")),
        };
        let range = (self.f(h[3])?, self.f(h[4])?);
        if n_trees == 0 || width == 0 {
            return Err(self.err("forest needs at least one tree and one output"));
        }
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let th = self.expect("tree")?;
            let th = self.arity(&th, 2, "tree")?.to_vec();
            let (n_nodes, n_values) = (self.u(th[0])?, self.u(th[1])?);
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let node = match self.peek_key() {
                    Some("leaf") => {
                        let t = self.expect("leaf")?;
                        let off = self.u(self.arity(&t, 1, "leaf")?[0])?;
                        if off + width > n_values {
                            return Err(self.err("leaf offset outside the value buffer"));
                        }
                        Node::Leaf(off)
                    }
                    Some("split") => {
                        let t = self.expect("split")?;
                        let t = self.arity(&t, 4, "split")?.to_vec();
                        Node::Split {
                            feature: self.u(t[0])?,
                            threshold: self.f(t[1])?,
                            left: self.u(t[2])?,
                            right: self.u(t[3])?,
                        }
                    }
                    _ => return Err(self.err("expected `leaf` or `split`")),
                };
                nodes.push(node);
            }
            for n in &nodes {
                if let Node::Split { left, right, .. } = *n {
                    if left >= n_nodes || right >= n_nodes {
                        return Err(self.err("split child index out of range"));
                    }
                }
            }
            let values = self.reals("values", Some(n_values))?;
            trees.push(Tree { nodes, values });
        }
        Ok(RandomForest { trees, width, classification, range })
    }

    fn logit(&mut self) -> Result<MultinomialLogit> {
        let h = self.expect("logit")?;
        let h = self.arity(&h, 4, "logit")?.to_vec();
        let (c, d) = (self.u(h[0])?, self.u(h[1])?);
        let converged = h[2] == "1";
        let iterations = self.u(h[3])?;
        let center = self.reals("center", Some(d))?;
        let scale = self.reals("scale", Some(d))?;
        let mut coef = Array2::zeros((c, d + 1));
        for k in 0..c {
            let row = self.reals("coef", Some(d + 1))?;
            coef.row_mut(k).assign(&ndarray::ArrayView1::from(&row));
        }
        let mut trace = self.reals("trace", None)?;
        if trace.is_empty() || trace[0] as usize != trace.len() - 1 {
            return Err(self.err("trace length prefix does not match"));
        }
        trace.remove(0);
        Ok(MultinomialLogit { center, scale, coef, converged, iterations, objective_trace: trace })
    }

    fn classifier(&mut self) -> Result<Classifier> {
        match self.peek_key() {
            Some("logit") => Ok(Classifier::Logit(self.logit()?)),
            Some("forest") => Ok(Classifier::Forest(self.forest()?)),
            _ => Err(self.err("expected a classifier (`logit` or `forest`)")),
        }
    }

    fn regressor(&mut self) -> Result<Regressor> {
        match self.peek_key() {
            Some("linear") => {
                let h = self.expect("linear")?;
                let h = self.arity(&h, 3, "linear")?.to_vec();
                let d = self.u(h[0])?;
                let range = (self.f(h[1])?, self.f(h[2])?);
                let center = self.reals("center", Some(d))?;
                let scale = self.reals("scale", Some(d))?;
                let coef = self.reals("coef", Some(d + 1))?;
                Ok(Regressor::Linear(LinearRegression { center, scale, coef, range }))
            }
            Some("forest") => Ok(Regressor::Forest(self.forest()?)),
            _ => Err(self.err("expected a regressor (`linear` or `forest`)")),
        }
    }

    fn nuisance(&mut self) -> Result<NuisanceModel> {
        let h = self.expect("nuisance")?;
        match h.first().copied() {
            Some("joint") if h.len() == 1 => {
                let plus = self.classifier()?;
                let minus = self.classifier()?;
                Ok(NuisanceModel::Joint(JointProbModel::from_classifiers(plus, minus)))
            }
            Some("continuous") if h.len() == 3 => {
                let (k0, k1) = (self.f(h[1])?, self.f(h[2])?);
                let mu = [[self.regressor()?, self.regressor()?], [self.regressor()?, self.regressor()?]];
                let pa = [self.classifier()?, self.classifier()?];
                let pz = self.classifier()?;
                Ok(NuisanceModel::Continuous(ContinuousNuisanceModel { mu, pa, pz, k0, k1 }))
            }
            _ => Err(self.err("unknown nuisance model")),
        }
    }
}

/// Parses a rule written by [`to_string`].
pub fn from_str(text: &str) -> Result<TreatmentRule> {
    let mut r = Reader::new(text);
    let h = r.expect(MAGIC)?;
    if h.len() != 1 || h[0] != VERSION.to_string() {
        return Err(r.err(format!("unsupported rule file version `{}`", h.join(" "))));
    }
    let kind = r.expect("kind")?;
    let rule = match kind.first().copied() {
        Some("kernel-expansion") => {
            let kernel = r.kernel()?;
            let beta0 = r.reals("beta0", Some(1))?[0];
            let s = r.expect("support")?;
            let s = r.arity(&s, 2, "support")?.to_vec();
            let (m, d) = (r.u(s[0])?, r.u(s[1])?);
            let mut support = Array2::zeros((m, d));
            let mut alphas = Vec::with_capacity(m);
            for i in 0..m {
                let row = r.reals("sv", Some(d + 1))?;
                alphas.push(row[0]);
                support.row_mut(i).assign(&ndarray::ArrayView1::from(&row[1..]));
            }
            TreatmentRule::KernelExpansion(KernelExpansion { support, alphas, beta0, kernel })
        }
        Some("plug-in") => {
            let b = r.expect("bound")?;
            let method = match b.as_slice() {
                ["bp"] => BoundMethod::BalkePearl,
                ["sid"] => BoundMethod::Siddique,
                ["mp", k0, k1] => {
                    let (k0, k1) = (r.f(k0)?, r.f(k1)?);
                    BoundMethod::manski_pepper(k0, k1).map_err(|e| r.err(e.to_string()))?
                }
                _ => return Err(r.err("unknown bound")),
            };
            let delta = r.reals("delta", Some(1))?[0];
            let model = Arc::new(r.nuisance()?);
            crate::estimators::plug_in_rule(model, method, delta).map_err(|e| r.err(e.to_string()))?
        }
        Some("constant") => TreatmentRule::Constant(r.reals("value", Some(1))?[0]),
        Some("coin-flip") => {
            let s = r.expect("seed")?;
            let s = r.arity(&s, 1, "seed")?.to_vec();
            TreatmentRule::CoinFlip { seed: s[0].parse().map_err(|_| r.err("seed must be an unsigned integer"))? }
        }
        _ => return Err(r.err("unknown rule kind")),
    };
    r.expect("end")?;
    if r.at != r.lines.len() {
        r.touch();
        return Err(r.err("trailing content after `end`"));
    }
    Ok(rule)
}
