//! Guard expressions: total predicates over a method's parameters.
//!
//! Grammar:
//!
//! ```text
//! guard   := "always" | "never" | or
//! or      := and ("||" and)*
//! and     := atom ("&&" atom)*
//! atom    := proj op literal | ("prefix" | "contains") "(" proj "," string ")"
//! op      := "==" | "!=" | "<" | "<="
//! proj    := "p" INDEX ("[" INDEX "]")* | "len" "(" proj ")"
//! literal := int | float | 'char' | "string" | true | false
//! ```
//!
//! Guards are type-checked against the signature at load time and never fail
//! at run time: any projection through a null value, and any out-of-range
//! element access, makes the atom false.

use std::fmt;

use crate::value::{Value, ValueType};

/// A projection into the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Proj {
    /// Parameter by position.
    Param(usize),
    /// Array element by index.
    Index(Box<Proj>, usize),
    /// Length of a string or array.
    Len(Box<Proj>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
}

impl CmpOp {
    fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Char(char),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Cmp { proj: Proj, op: CmpOp, lit: Literal },
    Prefix { proj: Proj, lit: String },
    Contains { proj: Proj, lit: String },
}

/// A total predicate: constant, or a disjunction of conjunctions of atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum GuardExpr {
    Always,
    Never,
    Or(Vec<Vec<Atom>>),
}

/// Guards stay small so targets remain readable and interpretation cheap.
pub const MAX_GUARD_ATOMS: usize = 4;

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: impl Into<String>) -> String {
        format!("guard parse error at offset {}: {}", self.pos, msg.into())
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let t = self.rest().trim_start();
        self.pos = self.src.len() - t.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(kw) {
            let after = &self.rest()[kw.len()..];
            if after.chars().next().is_none_or(|c| !c.is_alphanumeric() && c != '_') {
                self.pos += kw.len();
                return true;
            }
        }
        false
    }

    fn expect(&mut self, tok: &str) -> Result<(), String> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{tok}`")))
        }
    }

    fn number(&mut self) -> Result<usize, String> {
        self.skip_ws();
        let digits: String = self.rest().chars().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            return Err(self.error("expected a number"));
        }
        self.pos += digits.len();
        digits.parse().map_err(|e| self.error(format!("bad number: {e}")))
    }

    fn proj(&mut self) -> Result<Proj, String> {
        self.skip_ws();
        let mut base = if self.eat_keyword("len") {
            self.expect("(")?;
            let inner = self.proj()?;
            self.expect(")")?;
            Proj::Len(Box::new(inner))
        } else if self.eat("p") {
            Proj::Param(self.number()?)
        } else {
            return Err(self.error("expected a projection (`pN` or `len(...)`)"));
        };
        loop {
            self.skip_ws();
            if self.rest().starts_with('[') {
                self.pos += 1;
                let idx = self.number()?;
                self.expect("]")?;
                base = Proj::Index(Box::new(base), idx);
            } else {
                return Ok(base);
            }
        }
    }

    fn string_lit(&mut self) -> Result<String, String> {
        self.expect("\"")?;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        loop {
            let (off, c) = chars
                .next()
                .ok_or_else(|| self.error("unterminated string literal"))?;
            match c {
                '"' => {
                    self.pos += off + 1;
                    return Ok(out);
                }
                '\\' => {
                    let (_, esc) = chars
                        .next()
                        .ok_or_else(|| self.error("dangling escape"))?;
                    out.push(match esc {
                        'n' => '\n',
                        'r' => '\r',
                        't' => '\t',
                        '0' => '\0',
                        '\\' => '\\',
                        '"' => '"',
                        '\'' => '\'',
                        other => return Err(self.error(format!("unknown escape `\\{other}`"))),
                    });
                }
                other => out.push(other),
            }
        }
    }

    fn literal(&mut self) -> Result<Literal, String> {
        self.skip_ws();
        if self.rest().starts_with('"') {
            return Ok(Literal::Str(self.string_lit()?));
        }
        if self.rest().starts_with('\'') {
            self.pos += 1;
            let mut chars = self.rest().chars();
            let c = chars.next().ok_or_else(|| self.error("empty char literal"))?;
            let c = if c == '\\' {
                let esc = chars.next().ok_or_else(|| self.error("dangling escape"))?;
                self.pos += 1 + esc.len_utf8();
                match esc {
                    'n' => '\n',
                    'r' => '\r',
                    't' => '\t',
                    '0' => '\0',
                    '\\' => '\\',
                    '\'' => '\'',
                    '"' => '"',
                    other => return Err(self.error(format!("unknown escape `\\{other}`"))),
                }
            } else {
                self.pos += c.len_utf8();
                c
            };
            self.expect("'")?;
            return Ok(Literal::Char(c));
        }
        if self.eat_keyword("true") {
            return Ok(Literal::Bool(true));
        }
        if self.eat_keyword("false") {
            return Ok(Literal::Bool(false));
        }
        let body: String = self
            .rest()
            .chars()
            .take_while(|&c| c.is_ascii_digit() || "+-.eE".contains(c))
            .collect();
        if body.is_empty() {
            return Err(self.error("expected a literal"));
        }
        self.pos += body.len();
        if body.contains(['.', 'e', 'E']) {
            body.parse::<f64>()
                .map(Literal::Float)
                .map_err(|e| self.error(format!("bad float literal: {e}")))
        } else {
            body.parse::<i64>()
                .map(Literal::Int)
                .map_err(|e| self.error(format!("bad int literal: {e}")))
        }
    }

    fn atom(&mut self) -> Result<Atom, String> {
        self.skip_ws();
        for (kw, contains) in [("prefix", false), ("contains", true)] {
            if self.rest().starts_with(kw) {
                let save = self.pos;
                if self.eat_keyword(kw) {
                    self.expect("(")?;
                    let proj = self.proj()?;
                    self.expect(",")?;
                    self.skip_ws();
                    let lit = self.string_lit()?;
                    self.expect(")")?;
                    return Ok(if contains {
                        Atom::Contains { proj, lit }
                    } else {
                        Atom::Prefix { proj, lit }
                    });
                }
                self.pos = save;
            }
        }
        let proj = self.proj()?;
        self.skip_ws();
        let op = if self.eat("==") {
            CmpOp::Eq
        } else if self.eat("!=") {
            CmpOp::Ne
        } else if self.eat("<=") {
            CmpOp::Le
        } else if self.eat("<") {
            CmpOp::Lt
        } else {
            return Err(self.error("expected a comparison operator"));
        };
        let lit = self.literal()?;
        Ok(Atom::Cmp { proj, op, lit })
    }

    fn guard(&mut self) -> Result<GuardExpr, String> {
        if self.eat_keyword("always") {
            return Ok(GuardExpr::Always);
        }
        if self.eat_keyword("never") {
            return Ok(GuardExpr::Never);
        }
        let mut groups = Vec::new();
        loop {
            let mut atoms = vec![self.atom()?];
            while self.eat("&&") {
                atoms.push(self.atom()?);
            }
            groups.push(atoms);
            if !self.eat("||") {
                break;
            }
        }
        Ok(GuardExpr::Or(groups))
    }
}

impl GuardExpr {
    pub fn parse(src: &str) -> Result<GuardExpr, String> {
        let mut p = Parser { src, pos: 0 };
        let g = p.guard()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.error("trailing characters"));
        }
        let atoms = g.atom_count();
        if atoms > MAX_GUARD_ATOMS {
            return Err(format!(
                "guard has {atoms} atoms, the limit is {MAX_GUARD_ATOMS}"
            ));
        }
        Ok(g)
    }

    pub fn atom_count(&self) -> usize {
        match self {
            GuardExpr::Always | GuardExpr::Never => 0,
            GuardExpr::Or(groups) => groups.iter().map(Vec::len).sum(),
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering (canonical text, reparses to the same expression)
// ---------------------------------------------------------------------------

impl fmt::Display for Proj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proj::Param(i) => write!(f, "p{i}"),
            Proj::Index(base, i) => write!(f, "{base}[{i}]"),
            Proj::Len(base) => write!(f, "len({base})"),
        }
    }
}

fn escape_str(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\0' => out.push_str("\\0"),
            other => out.push(other),
        }
    }
    out
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(x) => write!(f, "{x}"),
            Literal::Float(x) => {
                if x.fract() == 0.0 && x.is_finite() {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Literal::Str(s) => write!(f, "\"{}\"", escape_str(s)),
            Literal::Char(c) => match c {
                '\n' => write!(f, "'\\n'"),
                '\r' => write!(f, "'\\r'"),
                '\t' => write!(f, "'\\t'"),
                '\0' => write!(f, "'\\0'"),
                '\\' => write!(f, "'\\\\'"),
                '\'' => write!(f, "'\\''"),
                other => write!(f, "'{other}'"),
            },
            Literal::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Cmp { proj, op, lit } => write!(f, "{proj} {} {lit}", op.as_str()),
            Atom::Prefix { proj, lit } => write!(f, "prefix({proj}, \"{}\")", escape_str(lit)),
            Atom::Contains { proj, lit } => {
                write!(f, "contains({proj}, \"{}\")", escape_str(lit))
            }
        }
    }
}

impl fmt::Display for GuardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardExpr::Always => f.write_str("always"),
            GuardExpr::Never => f.write_str("never"),
            GuardExpr::Or(groups) => {
                let rendered: Vec<String> = groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .map(Atom::to_string)
                            .collect::<Vec<_>>()
                            .join(" && ")
                    })
                    .collect();
                f.write_str(&rendered.join(" || "))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Type checking
// ---------------------------------------------------------------------------

fn proj_type(proj: &Proj, params: &[ValueType]) -> Result<ValueType, String> {
    match proj {
        Proj::Param(i) => params
            .get(*i)
            .cloned()
            .ok_or_else(|| format!("projection references unknown parameter p{i}")),
        Proj::Index(base, _) => match proj_type(base, params)? {
            ValueType::Array(elem) => Ok(*elem),
            other => Err(format!("`{base}` is not an array (it is {other:?})")),
        },
        Proj::Len(base) => match proj_type(base, params)? {
            ValueType::Array(_) | ValueType::String => Ok(ValueType::Long),
            other => Err(format!("len() needs a string or array, got {other:?}")),
        },
    }
}

fn check_atom(atom: &Atom, params: &[ValueType]) -> Result<(), String> {
    match atom {
        Atom::Cmp { proj, op: _, lit } => {
            let ty = proj_type(proj, params)?;
            let ok = matches!(
                (&ty, lit),
                (
                    ValueType::Byte | ValueType::Short | ValueType::Integer | ValueType::Long,
                    Literal::Int(_)
                ) | (ValueType::Float | ValueType::Double, Literal::Float(_) | Literal::Int(_))
                    | (ValueType::Char, Literal::Char(_))
                    | (ValueType::Boolean, Literal::Bool(_))
                    | (ValueType::String, Literal::Str(_))
            );
            if ok {
                Ok(())
            } else {
                Err(format!("`{atom}`: literal does not match the type {ty:?}"))
            }
        }
        Atom::Prefix { proj, .. } | Atom::Contains { proj, .. } => {
            match proj_type(proj, params)? {
                ValueType::String => Ok(()),
                other => Err(format!("`{atom}` needs a string projection, got {other:?}")),
            }
        }
    }
}

impl GuardExpr {
    /// Verifies every projection and literal against the parameter types.
    pub fn typecheck(&self, params: &[ValueType]) -> Result<(), String> {
        if let GuardExpr::Or(groups) = self {
            for atom in groups.iter().flatten() {
                check_atom(atom, params)?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Resolves a projection to a value; `None` when the path crosses a null or
/// leaves an array's bounds.
fn project<'v>(proj: &Proj, inputs: &'v [Value]) -> Option<ProjValue<'v>> {
    match proj {
        Proj::Param(i) => inputs.get(*i).map(ProjValue::Val),
        Proj::Index(base, idx) => match project(base, inputs)? {
            ProjValue::Val(Value::Array { items, .. }) => items.get(*idx).map(ProjValue::Val),
            _ => None,
        },
        Proj::Len(base) => match project(base, inputs)? {
            ProjValue::Val(Value::Str(s)) => Some(ProjValue::Len(s.chars().count() as i64)),
            ProjValue::Val(Value::Array { items, .. }) => {
                Some(ProjValue::Len(items.len() as i64))
            }
            _ => None,
        },
    }
}

enum ProjValue<'v> {
    Val(&'v Value),
    Len(i64),
}

fn cmp_with<T: PartialOrd + PartialEq>(op: CmpOp, a: T, b: T) -> bool {
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
    }
}

fn eval_atom(atom: &Atom, inputs: &[Value]) -> bool {
    match atom {
        Atom::Cmp { proj, op, lit } => {
            let Some(pv) = project(proj, inputs) else { return false };
            match (pv, lit) {
                (ProjValue::Len(n), Literal::Int(x)) => cmp_with(*op, n, *x),
                (ProjValue::Val(v), lit) => match (v, lit) {
                    (Value::Byte(a), Literal::Int(b)) => cmp_with(*op, i64::from(*a), *b),
                    (Value::Short(a), Literal::Int(b)) => cmp_with(*op, i64::from(*a), *b),
                    (Value::Integer(a), Literal::Int(b)) => cmp_with(*op, i64::from(*a), *b),
                    (Value::Long(a), Literal::Int(b)) => cmp_with(*op, *a, *b),
                    (Value::Float(a), Literal::Float(b)) => cmp_with(*op, f64::from(*a), *b),
                    (Value::Float(a), Literal::Int(b)) => {
                        cmp_with(*op, f64::from(*a), *b as f64)
                    }
                    (Value::Double(a), Literal::Float(b)) => cmp_with(*op, *a, *b),
                    (Value::Double(a), Literal::Int(b)) => cmp_with(*op, *a, *b as f64),
                    (Value::Char(a), Literal::Char(b)) => cmp_with(*op, *a, *b),
                    (Value::Boolean(a), Literal::Bool(b)) => {
                        cmp_with(*op, u8::from(*a), u8::from(*b))
                    }
                    (Value::Str(a), Literal::Str(b)) => cmp_with(*op, a.as_str(), b.as_str()),
                    // Nulls and type-mismatched projections fail the atom.
                    _ => false,
                },
                _ => false,
            }
        }
        Atom::Prefix { proj, lit } => match project(proj, inputs) {
            Some(ProjValue::Val(Value::Str(s))) => s.starts_with(lit.as_str()),
            _ => false,
        },
        Atom::Contains { proj, lit } => match project(proj, inputs) {
            Some(ProjValue::Val(Value::Str(s))) => s.contains(lit.as_str()),
            _ => false,
        },
    }
}

impl GuardExpr {
    /// Total evaluation; atoms over nulls or out-of-range elements are false.
    pub fn eval(&self, inputs: &[Value]) -> bool {
        match self {
            GuardExpr::Always => true,
            GuardExpr::Never => false,
            GuardExpr::Or(groups) => groups
                .iter()
                .any(|atoms| atoms.iter().all(|a| eval_atom(a, inputs))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(xs: &[i32]) -> Vec<Value> {
        xs.iter().map(|&x| Value::Integer(x)).collect()
    }

    #[test]
    fn parses_and_evaluates_comparisons() {
        let g = GuardExpr::parse("p0 == 7").unwrap();
        g.typecheck(&[ValueType::Integer]).unwrap();
        assert!(g.eval(&ints(&[7])));
        assert!(!g.eval(&ints(&[3])));
    }

    #[test]
    fn conjunction_and_disjunction() {
        let g = GuardExpr::parse("p0 == 1 && p1 <= 5 || p0 == 9").unwrap();
        g.typecheck(&[ValueType::Integer, ValueType::Integer]).unwrap();
        assert!(g.eval(&ints(&[1, 4])));
        assert!(!g.eval(&ints(&[1, 6])));
        assert!(g.eval(&ints(&[9, 100])));
    }

    #[test]
    fn array_projection_and_length() {
        let g = GuardExpr::parse("p0[1] == 3 && len(p0) <= 4").unwrap();
        let ty = ValueType::Array(Box::new(ValueType::Integer));
        g.typecheck(std::slice::from_ref(&ty)).unwrap();
        let arr = Value::Array {
            elem: Box::new(ValueType::Integer),
            items: ints(&[9, 3]),
        };
        assert!(g.eval(&[arr]));
        let short = Value::Array { elem: Box::new(ValueType::Integer), items: vec![] };
        assert!(!g.eval(&[short]), "out-of-range element access is false");
    }

    #[test]
    fn string_predicates() {
        let g = GuardExpr::parse("prefix(p0, \"sip:\") && contains(p0, \"'\")").unwrap();
        g.typecheck(&[ValueType::String]).unwrap();
        assert!(g.eval(&[Value::Str("sip:x'y".into())]));
        assert!(!g.eval(&[Value::Str("sip:xy".into())]));
        assert!(!g.eval(&[Value::Null(Box::new(ValueType::String))]));
    }

    #[test]
    fn nulls_fail_every_atom_including_ne() {
        let g = GuardExpr::parse("p0 != \"x\"").unwrap();
        assert!(!g.eval(&[Value::Null(Box::new(ValueType::String))]));
        assert!(g.eval(&[Value::Str("y".into())]));
    }

    #[test]
    fn typecheck_rejects_unknown_params_and_bad_literals() {
        let g = GuardExpr::parse("p2 == 1").unwrap();
        assert!(g.typecheck(&[ValueType::Integer]).is_err());
        let g = GuardExpr::parse("p0 == \"x\"").unwrap();
        assert!(g.typecheck(&[ValueType::Integer]).is_err());
        let g = GuardExpr::parse("len(p0) == 1").unwrap();
        assert!(g.typecheck(&[ValueType::Integer]).is_err());
    }

    #[test]
    fn atom_limit_enforced() {
        assert!(GuardExpr::parse("p0 == 1 && p0 == 2 && p0 == 3 && p0 == 4").is_ok());
        assert!(GuardExpr::parse("p0 == 1 && p0 == 2 && p0 == 3 && p0 == 4 && p0 == 5").is_err());
    }

    #[test]
    fn display_roundtrips() {
        for src in [
            "always",
            "never",
            "p0 == 7",
            "p0[3] != 'x' && len(p1) <= 9",
            "prefix(p0, \"a\\\"b\") || contains(p0, \"\\n\")",
            "p0 < 1.5 || p1 == true",
        ] {
            let g = GuardExpr::parse(src).unwrap();
            let rendered = g.to_string();
            let back = GuardExpr::parse(&rendered)
                .unwrap_or_else(|e| panic!("`{rendered}` failed to reparse: {e}"));
            assert_eq!(back, g, "roundtrip of `{src}` via `{rendered}`");
        }
    }

    #[test]
    fn nan_comparisons_are_false_but_total() {
        let g = GuardExpr::parse("p0 < 1.0").unwrap();
        assert!(!g.eval(&[Value::Double(f64::NAN)]));
        let g = GuardExpr::parse("p0 == 0.0").unwrap();
        assert!(!g.eval(&[Value::Double(f64::NAN)]));
    }
}
