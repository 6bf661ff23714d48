//! Equation models in a small line-oriented text format.
//!
//! ```text
//! # comment
//! input PAP in [1.0, 88.0]
//! input LAP in [1.0, 88.0]
//! input CO  in [1.0, 100.0]
//! PVR = (PAP - LAP)/CO in [0, inf]
//! criterion: PVR <= 1.62
//! ```
//!
//! Inputs need a finite range of positive width. A range on a derived
//! variable clips it: `PVR` above is `max(0, (PAP - LAP)/CO)`.

use std::collections::HashSet;

use crate::interval::Interval;

use super::parse::{lex, parse_criterion, ParseError, Parser, Tok};
use super::tape::Tape;
use super::{Criterion, EvalError, Expr};

/// A derived variable `var = expr`, clipped to `range` when one is declared.
#[derive(Clone, Debug)]
pub struct Derived {
    pub var: usize,
    pub expr: Expr,
    pub range: Option<Interval>,
    tape: Tape,
}

impl Derived {
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Applies the declared range to a value of the defining expression.
    pub fn clip(&self, x: f64) -> f64 {
        match self.range {
            Some(r) => x.clamp(r.lo(), r.hi()),
            None => x,
        }
    }
}

/// Input variables come first (indices `0..n_inputs`), then derived
/// variables in an order where each definition only uses earlier ones.
#[derive(Clone, Debug)]
pub struct Model {
    names: Vec<String>,
    input_ranges: Vec<Interval>,
    derived: Vec<Derived>,
    criterion: Option<(Criterion, String)>,
}

struct RawDerived {
    name: String,
    expr_toks: Vec<super::parse::Token>,
    range: Option<Interval>,
    line: usize,
    end_col: usize,
}

impl Model {
    pub fn parse(text: &str) -> Result<Model, ParseError> {
        let mut inputs: Vec<(String, Interval)> = Vec::new();
        let mut raw: Vec<RawDerived> = Vec::new();
        let mut criterion_line: Option<(String, usize)> = None;
        let mut seen: HashSet<String> = HashSet::new();

        for (ln, full) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = full.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let end_col = line.chars().count() + 1;
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix("criterion") {
                let rest_trim = rest.trim_start();
                if let Some(body) = rest_trim.strip_prefix(':') {
                    if criterion_line.is_some() {
                        let col = line.len() - trimmed.len() + 1;
                        return Err(ParseError::Duplicate {
                            line: line_no,
                            col,
                            name: "criterion".into(),
                        });
                    }
                    // keep columns meaningful by blanking the prefix
                    let prefix_len = line.len() - body.len();
                    let padded = format!("{}{}", " ".repeat(prefix_len), body);
                    criterion_line = Some((padded, line_no));
                    continue;
                }
            }

            let toks = lex(line, line_no)?;
            let mut p = Parser::new(toks.clone(), &[], line_no, end_col);
            let is_input = matches!(&toks[0].tok, Tok::Ident(w) if w == "input");
            if is_input {
                p.expect_word("input")?;
                let (name, l, c) = p.name()?;
                if !seen.insert(name.clone()) {
                    return Err(ParseError::Duplicate { line: l, col: c, name });
                }
                p.expect_word("in")?;
                let range = parse_range(&mut p, &name, l, c)?;
                p.finish()?;
                if !range.is_finite() || range.lo() >= range.hi() {
                    return Err(ParseError::BadRange {
                        line: l,
                        col: c,
                        name,
                        msg: "an input needs a finite range of positive width".into(),
                    });
                }
                inputs.push((name, range));
                continue;
            }

            let (name, l, c) = p.name()?;
            if !seen.insert(name.clone()) {
                return Err(ParseError::Duplicate { line: l, col: c, name });
            }
            p.expect_sym("=")?;
            // the expression runs up to a trailing `in [..]`, if any
            let start = 2;
            let in_pos = toks
                .iter()
                .enumerate()
                .skip(start)
                .rev()
                .find(|(_, t)| matches!(&t.tok, Tok::Ident(w) if w == "in"))
                .map(|(i, _)| i);
            let (expr_toks, range) = match in_pos {
                Some(i) => {
                    let mut rp = Parser::new(toks[i + 1..].to_vec(), &[], line_no, end_col);
                    let range = parse_range(&mut rp, &name, l, c)?;
                    rp.finish()?;
                    (toks[start..i].to_vec(), Some(range))
                }
                None => (toks[start..].to_vec(), None),
            };
            if expr_toks.is_empty() {
                let col = toks.get(start).map_or(end_col, |t| t.col);
                return Err(ParseError::Syntax {
                    line: line_no,
                    col,
                    msg: "expected an expression".into(),
                });
            }
            raw.push(RawDerived {
                name,
                expr_toks,
                range,
                line: line_no,
                end_col,
            });
        }

        // Provisional symbol table: inputs, then derived in text order.
        let n_in = inputs.len();
        let mut prov: Vec<String> = inputs.iter().map(|(n, _)| n.clone()).collect();
        prov.extend(raw.iter().map(|r| r.name.clone()));
        let mut exprs = Vec::with_capacity(raw.len());
        for r in &raw {
            let mut p = Parser::new(r.expr_toks.clone(), &prov, r.line, r.end_col);
            let e = p.expr()?;
            p.finish()?;
            exprs.push(e);
        }

        let order = topo_order(&raw, &exprs, n_in)?;
        // remap provisional derived index (n_in + k) to final position
        let mut remap = vec![0usize; prov.len()];
        for (i, slot) in remap.iter_mut().enumerate().take(n_in) {
            *slot = i;
        }
        for (pos, &k) in order.iter().enumerate() {
            remap[n_in + k] = n_in + pos;
        }
        let mut names: Vec<String> = inputs.iter().map(|(n, _)| n.clone()).collect();
        let mut derived = Vec::with_capacity(raw.len());
        for (pos, &k) in order.iter().enumerate() {
            names.push(raw[k].name.clone());
            let expr = exprs[k].substitute(&|i| Some(Expr::Var(remap[i])));
            let tape = Tape::compile(&expr);
            derived.push(Derived {
                var: n_in + pos,
                expr,
                range: raw[k].range,
                tape,
            });
        }

        let mut model = Model {
            names,
            input_ranges: inputs.into_iter().map(|(_, r)| r).collect(),
            derived,
            criterion: None,
        };
        if let Some((src, line)) = criterion_line {
            let c = parse_criterion(&src, &model.names, line)?;
            model.criterion = Some((c, src.trim().to_string()));
        }
        Ok(model)
    }

    /// Parses a criterion against this model's variables.
    pub fn parse_criterion(&self, text: &str) -> Result<Criterion, ParseError> {
        parse_criterion(text, &self.names, 1)
    }

    /// Parses an expression against this model's variables.
    pub fn parse_expression(&self, text: &str) -> Result<Expr, ParseError> {
        super::parse_expression(text, &self.names)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn input_names(&self) -> &[String] {
        &self.names[..self.input_ranges.len()]
    }

    pub fn n_inputs(&self) -> usize {
        self.input_ranges.len()
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn input_ranges(&self) -> &[Interval] {
        &self.input_ranges
    }

    pub fn derived(&self) -> &[Derived] {
        &self.derived
    }

    /// The criterion given in the model text, if any.
    pub fn criterion(&self) -> Option<&Criterion> {
        self.criterion.as_ref().map(|c| &c.0)
    }

    /// Source text of the model's criterion line, after the colon.
    pub fn criterion_text(&self) -> Option<&str> {
        self.criterion.as_ref().map(|c| c.1.as_str())
    }

    /// Values of all variables at an input point, derived ranges applied.
    pub fn eval_point(&self, inputs: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut values = inputs[..self.n_inputs()].to_vec();
        for d in &self.derived {
            let x = d.expr.eval_point(&values)?;
            values.push(d.clip(x));
        }
        Ok(values)
    }

    /// Like [`Model::eval_point`] without allocation and without the
    /// division-by-zero check; a pole produces an infinity or NaN.
    pub fn eval_point_into(&self, inputs: &[f64], values: &mut Vec<f64>, scratch: &mut Vec<f64>) {
        values.clear();
        values.extend_from_slice(&inputs[..self.n_inputs()]);
        for d in &self.derived {
            let x = d.tape.eval_point(values, scratch);
            values.push(d.clip(x));
        }
    }

    /// Inlines derived variables so the result only mentions inputs.
    /// Declared ranges are not representable and are dropped.
    pub fn expand(&self, e: &Expr) -> Expr {
        let n = self.n_inputs();
        let mut inlined: Vec<Expr> = Vec::with_capacity(self.derived.len());
        for d in &self.derived {
            let x = d.expr.substitute(&|i| if i >= n { Some(inlined[i - n].clone()) } else { None });
            inlined.push(x);
        }
        e.substitute(&|i| if i >= n { Some(inlined[i - n].clone()) } else { None })
    }
}

fn parse_range(p: &mut Parser<'_>, name: &str, line: usize, col: usize) -> Result<Interval, ParseError> {
    p.expect_sym("[")?;
    let lo = p.signed_number()?;
    p.expect_sym(",")?;
    let hi = p.signed_number()?;
    p.expect_sym("]")?;
    Interval::try_new(lo, hi).ok_or_else(|| ParseError::BadRange {
        line,
        col,
        name: name.to_string(),
        msg: format!("[{lo}, {hi}] is empty"),
    })
}

/// Orders derived definitions so each comes after the ones it uses.
fn topo_order(raw: &[RawDerived], exprs: &[Expr], n_in: usize) -> Result<Vec<usize>, ParseError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        k: usize,
        exprs: &[Expr],
        n_in: usize,
        marks: &mut [Mark],
        stack: &mut Vec<usize>,
        out: &mut Vec<usize>,
        raw: &[RawDerived],
    ) -> Result<(), ParseError> {
        match marks[k] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let from = stack.iter().position(|&s| s == k).unwrap_or(0);
                let mut cycle: Vec<String> = stack[from..].iter().map(|&s| raw[s].name.clone()).collect();
                cycle.push(raw[k].name.clone());
                return Err(ParseError::Cyclic { cycle });
            }
            Mark::New => {}
        }
        marks[k] = Mark::Active;
        stack.push(k);
        for v in exprs[k].variables() {
            if v >= n_in {
                visit(v - n_in, exprs, n_in, marks, stack, out, raw)?;
            }
        }
        stack.pop();
        marks[k] = Mark::Done;
        out.push(k);
        Ok(())
    }
    let mut marks = vec![Mark::New; raw.len()];
    let mut out = Vec::with_capacity(raw.len());
    let mut stack = Vec::new();
    for k in 0..raw.len() {
        visit(k, exprs, n_in, &mut marks, &mut stack, &mut out, raw)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PVR: &str = "\
# pulmonary vascular resistance
input PAP in [1.0, 88.0]
input LAP in [1.0, 88.0]
input CO in [1.0, 100]
PVR = (PAP - LAP)/CO in [0, inf]
criterion: PVR <= 1.62
";

    #[test]
    fn parses_pvr() {
        let m = Model::parse(PVR).unwrap();
        assert_eq!(m.names(), ["PAP", "LAP", "CO", "PVR"]);
        assert_eq!(m.n_inputs(), 3);
        assert_eq!(m.derived().len(), 1);
        assert_eq!(m.derived()[0].range, Some(Interval::NONNEGATIVE));
        assert!(m.criterion().is_some());
        assert_eq!(m.criterion_text(), Some("PVR <= 1.62"));
        let v = m.eval_point(&[23.94, 15.29, 6.49]).unwrap();
        assert!((v[3] - 1.3328).abs() < 1e-4);
        // clipped below at zero
        let v = m.eval_point(&[10.0, 20.0, 5.0]).unwrap();
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn simple_product() {
        let m = Model::parse("input a in [0, 5]\ninput b in [0, 5]\ny = a*b").unwrap();
        assert_eq!(m.eval_point(&[2.0, 3.0]).unwrap()[2], 6.0);
    }

    #[test]
    fn rejects_self_reference() {
        let err = Model::parse("input a in [0,1]\nx = x + 1").unwrap_err();
        assert_eq!(err, ParseError::Cyclic { cycle: vec!["x".into(), "x".into()] });
    }

    #[test]
    fn rejects_longer_cycle() {
        let err = Model::parse("input a in [0,1]\nx = y + a\ny = z\nz = 2*x").unwrap_err();
        assert!(matches!(err, ParseError::Cyclic { .. }), "{err}");
    }

    #[test]
    fn orders_definitions_topologically() {
        let m = Model::parse("input a in [0,1]\nz = y + 1\ny = 2*a").unwrap();
        assert_eq!(m.names(), ["a", "y", "z"]);
        assert_eq!(m.eval_point(&[0.25]).unwrap(), vec![0.25, 0.5, 1.5]);
        let z = m.expand(&Expr::Var(2));
        assert_eq!(z.eval_point(&[0.25]).unwrap(), 1.5);
    }

    #[test]
    fn reports_errors_with_positions() {
        let e = Model::parse("input a in [0,1]\ny = a + b").unwrap_err();
        assert_eq!(
            e,
            ParseError::Undeclared {
                line: 2,
                col: 9,
                name: "b".into()
            }
        );
        let e = Model::parse("input a in [0,1]\ninput a in [0,2]").unwrap_err();
        assert!(matches!(e, ParseError::Duplicate { line: 2, .. }));
        let e = Model::parse("input a in [1, 0]").unwrap_err();
        assert!(matches!(e, ParseError::BadRange { .. }));
        let e = Model::parse("input a in [0, inf]").unwrap_err();
        assert!(matches!(e, ParseError::BadRange { .. }));
        let e = Model::parse("input a in [0,1]\ny = a^0.5").unwrap_err();
        assert!(matches!(e, ParseError::NonIntegerExponent { line: 2, .. }));
        let e = Model::parse("input a in [0,1]\ncriterion: a <= ").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 2, .. }), "{e}");
        let e = Model::parse("input in in [0,1]").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 1, col: 7, .. }), "{e}");
    }
}
