//! Parsers for the two on-disk formats:
//!
//! * `.crn` — a line-oriented reaction DSL, one reaction per line:
//!
//!   ```text
//!   # dimerization with decay
//!   2 v1 <-> v2 @ 1.0, 1.0
//!   v1 -> 0 @ 1.0
//!   ```
//!
//!   `->` takes one rate, `<->` two (forward, backward). `0` denotes the
//!   empty complex. Species are declared implicitly, indexed in order of
//!   first appearance.
//!
//! * `.model` — a TOML document with keys `crn` (inline DSL or a file path),
//!   `alpha`, `chi`, `D`, `D_tilde`, `domain` and optional `chemoattractant`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::Deserialize;

use crate::error::{Error, ParseError, Result};
use crate::model::{DomainSpec, ModelSpec, Reaction, ReactionNetwork, Species, MAX_STOICH};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Plus,
    At,
    Comma,
    ArrowOne,
    ArrowTwo,
}

struct Spanned {
    tok: Tok,
    col: usize,
}

fn lex_line(line: &str, line_no: usize) -> std::result::Result<Vec<Spanned>, ParseError> {
    let err = |col: usize, msg: &str| ParseError::new(line_no, col, msg, line);
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '+' => {
                toks.push(Spanned { tok: Tok::Plus, col });
                i += 1;
            }
            '@' => {
                toks.push(Spanned { tok: Tok::At, col });
                i += 1;
            }
            ',' => {
                toks.push(Spanned { tok: Tok::Comma, col });
                i += 1;
            }
            '<' => {
                if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') {
                    toks.push(Spanned { tok: Tok::ArrowTwo, col });
                    i += 3;
                } else {
                    return Err(err(col, "expected '<->'"));
                }
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    toks.push(Spanned { tok: Tok::ArrowOne, col });
                    i += 2;
                } else if chars.get(i + 1).is_some_and(|c| c.is_ascii_digit() || *c == '.') {
                    let (text, next) = lex_number(&chars, i);
                    toks.push(Spanned { tok: Tok::Num(text), col });
                    i = next;
                } else {
                    return Err(err(col, "expected '->'"));
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let (text, next) = lex_number(&chars, i);
                toks.push(Spanned { tok: Tok::Num(text), col });
                i = next;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                toks.push(Spanned { tok: Tok::Ident(name), col });
            }
            other => return Err(err(col, &format!("unexpected character {other:?}"))),
        }
    }
    Ok(toks)
}

fn lex_number(chars: &[char], start: usize) -> (String, usize) {
    let mut i = start;
    if chars[i] == '-' {
        i += 1;
    }
    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
        i += 1;
    }
    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
        let mut j = i + 1;
        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
            j += 1;
        }
        if j < chars.len() && chars[j].is_ascii_digit() {
            i = j;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    (chars[start..i].iter().collect(), i)
}

/// One side of a reaction statement: the empty complex or a stoichiometry map.
type Side = BTreeMap<String, u32>;

struct LineParser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    line: &'a str,
    line_no: usize,
}

impl<'a> LineParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|s| s.col)
            .unwrap_or(self.line.chars().count() + 1)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line_no, self.col(), msg, self.line)
    }

    fn advance(&mut self) {
        self.pos += 1;
    }

    fn parse_side(&mut self) -> std::result::Result<Side, ParseError> {
        // A lone `0` is the empty complex.
        if let Some(Tok::Num(text)) = self.peek() {
            if text == "0" && !matches!(self.toks.get(self.pos + 1).map(|s| &s.tok), Some(Tok::Ident(_))) {
                self.advance();
                if matches!(self.peek(), Some(Tok::Plus)) {
                    return Err(self.err("the empty complex '0' must stand alone"));
                }
                return Ok(Side::new());
            }
        }
        let mut side = Side::new();
        loop {
            let mut coeff = 1u32;
            if let Some(Tok::Num(text)) = self.peek() {
                let text = text.clone();
                coeff = text.parse::<u32>().map_err(|_| {
                    self.err(format!("stoichiometric coefficient {text:?} is not a small integer"))
                })?;
                if coeff == 0 || coeff > MAX_STOICH {
                    return Err(
                        self.err(format!("stoichiometric coefficient must be 1..={MAX_STOICH}"))
                    );
                }
                self.advance();
            }
            let name = match self.peek() {
                Some(Tok::Ident(name)) => name.clone(),
                _ => return Err(self.err("expected a species name")),
            };
            self.advance();
            let total = side.entry(name).or_insert(0);
            *total += coeff;
            if *total > MAX_STOICH {
                return Err(self.err(format!("stoichiometric coefficient exceeds {MAX_STOICH}")));
            }
            match self.peek() {
                Some(Tok::Plus) => self.advance(),
                _ => break,
            }
        }
        Ok(side)
    }

    fn parse_rate(&mut self) -> std::result::Result<f64, ParseError> {
        let text = match self.peek() {
            Some(Tok::Num(text)) => text.clone(),
            _ => return Err(self.err("expected a rate constant")),
        };
        let value: f64 = text
            .parse()
            .map_err(|_| self.err(format!("invalid number {text:?}")))?;
        if value < 0.0 {
            return Err(self.err("rate constants must be nonnegative"));
        }
        if !value.is_finite() {
            return Err(self.err("rate constant overflows f64"));
        }
        self.advance();
        Ok(value)
    }
}

/// Parses the reaction DSL into a [`ReactionNetwork`]. Species are indexed
/// in order of first appearance.
pub fn parse_crn(text: &str) -> std::result::Result<ReactionNetwork, ParseError> {
    let mut species: Vec<Species> = Vec::new();
    let mut index_of: BTreeMap<String, usize> = BTreeMap::new();
    let mut reactions = Vec::new();

    let mut intern = |name: String, species: &mut Vec<Species>| -> usize {
        *index_of.entry(name.clone()).or_insert_with(|| {
            let index = species.len();
            species.push(Species { index, name });
            index
        })
    };

    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let toks = lex_line(line, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser { toks, pos: 0, line, line_no };

        let lhs = p.parse_side()?;
        let reversible = match p.peek() {
            Some(Tok::ArrowOne) => false,
            Some(Tok::ArrowTwo) => true,
            _ => return Err(p.err("expected '->' or '<->'")),
        };
        p.advance();
        let rhs = p.parse_side()?;
        if lhs.is_empty() && rhs.is_empty() {
            return Err(p.err("reaction has empty sides on both ends"));
        }
        match p.peek() {
            Some(Tok::At) => p.advance(),
            _ => return Err(p.err("expected '@' followed by the rate")),
        }
        let forward = p.parse_rate()?;
        let backward = if matches!(p.peek(), Some(Tok::Comma)) {
            p.advance();
            Some(p.parse_rate()?)
        } else {
            None
        };
        match p.peek() {
            None => {}
            Some(Tok::At) => return Err(p.err("duplicate '@' clause")),
            Some(Tok::Comma) => return Err(p.err("at most two rates are allowed")),
            Some(_) => return Err(p.err("unexpected token after the rates")),
        }
        match (reversible, backward) {
            (true, None) => {
                return Err(p.err("'<->' requires two rates: forward, backward"));
            }
            (false, Some(_)) => {
                return Err(p.err("'->' takes a single rate; use '<->' for two"));
            }
            _ => {}
        }

        let lhs: Vec<(usize, u32)> = lhs
            .into_iter()
            .map(|(name, c)| (intern(name, &mut species), c))
            .collect();
        let rhs: Vec<(usize, u32)> = rhs
            .into_iter()
            .map(|(name, c)| (intern(name, &mut species), c))
            .collect();

        reactions.push(Reaction::new(lhs.clone(), rhs.clone(), forward));
        if let Some(rate) = backward {
            reactions.push(Reaction::new(rhs, lhs, rate));
        }
    }

    let net = ReactionNetwork { species, reactions };
    net.validate().map_err(|e| match e {
        Error::Parse(p) => p,
        other => ParseError::new(0, 0, other.to_string(), ""),
    })?;
    Ok(net)
}

/// Renders a network back into DSL text, one `->` statement per reaction.
/// Reversible pairs are written as two lines; parsing the output yields a
/// structurally identical network.
pub fn network_to_dsl(net: &ReactionNetwork) -> String {
    let side = |stoich: &BTreeMap<usize, u32>| -> String {
        if stoich.is_empty() {
            return "0".to_string();
        }
        stoich
            .iter()
            .map(|(&k, &c)| {
                if c == 1 {
                    net.species[k].name.clone()
                } else {
                    format!("{} {}", c, net.species[k].name)
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    };
    let mut out = String::new();
    for r in &net.reactions {
        out.push_str(&format!(
            "{} -> {} @ {}\n",
            side(&r.reactants),
            side(&r.products),
            r.rate
        ));
    }
    out
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    crn: String,
    alpha: Vec<f64>,
    chi: f64,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "D_tilde")]
    d_tilde: Vec<f64>,
    domain: RawDomain,
    chemoattractant: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: String,
    #[serde(rename = "L")]
    l: Option<f64>,
    #[serde(rename = "Lx")]
    lx: Option<f64>,
    #[serde(rename = "Ly")]
    ly: Option<f64>,
}

fn toml_error(text: &str, err: &toml::de::Error) -> ParseError {
    let (line, column, snippet) = match err.span() {
        Some(span) => position_of(text, span.start),
        None => (1, 1, text.lines().next().unwrap_or("").to_string()),
    };
    ParseError::new(line, column, err.message(), &snippet)
}

fn position_of(text: &str, offset: usize) -> (usize, usize, String) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.bytes().filter(|&b| b == b'\n').count() + 1;
    let line_start = before.rfind('\n').map(|p| p + 1).unwrap_or(0);
    let column = text[line_start..offset].chars().count() + 1;
    let snippet = text[line_start..].lines().next().unwrap_or("").to_string();
    (line, column, snippet)
}

/// Parses a `.model` document. A `crn` value containing an arrow (or blank)
/// is treated as inline DSL; anything else is read as a path relative to
/// `base` (the model file's directory for [`load_model`], the working
/// directory otherwise).
pub fn parse_model_with_base(text: &str, base: Option<&Path>) -> Result<ModelSpec> {
    let raw: RawModel = toml::from_str(text).map_err(|e| toml_error(text, &e))?;

    let crn_value = raw.crn.trim();
    let network = if crn_value.is_empty() || raw.crn.contains("->") {
        parse_crn(&raw.crn)?
    } else {
        let path = match base {
            Some(dir) => dir.join(crn_value),
            None => Path::new(crn_value).to_path_buf(),
        };
        let crn_text = std::fs::read_to_string(&path).map_err(|e| {
            Error::Validation(format!("cannot read crn file {}: {}", path.display(), e))
        })?;
        parse_crn(&crn_text)?
    };

    let domain = match raw.domain.kind.as_str() {
        "interval" => {
            if raw.domain.lx.is_some() || raw.domain.ly.is_some() {
                return Err(Error::Validation(
                    "interval domains take 'L', not 'Lx'/'Ly'".into(),
                ));
            }
            let length = raw
                .domain
                .l
                .ok_or_else(|| Error::Validation("interval domain requires 'L'".into()))?;
            DomainSpec::Interval { length }
        }
        "rectangle" => {
            if raw.domain.l.is_some() {
                return Err(Error::Validation(
                    "rectangle domains take 'Lx'/'Ly', not 'L'".into(),
                ));
            }
            let lx = raw
                .domain
                .lx
                .ok_or_else(|| Error::Validation("rectangle domain requires 'Lx'".into()))?;
            let ly = raw
                .domain
                .ly
                .ok_or_else(|| Error::Validation("rectangle domain requires 'Ly'".into()))?;
            DomainSpec::Rectangle { lx, ly }
        }
        other => {
            return Err(Error::Validation(format!(
                "unknown domain kind {other:?} (expected \"interval\" or \"rectangle\")"
            )))
        }
    };

    let n = network.n_species();
    let chemoattractant = match &raw.chemoattractant {
        Some(name) => network.species_index(name).ok_or_else(|| {
            Error::Validation(format!("chemoattractant species {name:?} not in the network"))
        })?,
        None => {
            if n == 0 {
                return Err(Error::Validation("network has no species".into()));
            }
            n - 1
        }
    };

    let model = ModelSpec {
        network,
        alpha: DVector::from_vec(raw.alpha),
        chi: raw.chi,
        cell_diffusion: raw.d,
        chem_diffusion: DVector::from_vec(raw.d_tilde),
        domain,
        chemoattractant,
    };
    model.validate()?;
    Ok(model)
}

/// Parses a `.model` document with crn paths resolved against the working
/// directory.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    parse_model_with_base(text, None)
}

/// Reads and parses a `.model` file; crn paths resolve relative to it.
pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_model_with_base(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimerization_dsl() {
        let net = parse_crn("2 v1 <-> v2 @ 1.0, 1.0\nv1 -> 0 @ 1.0\nv2 -> 0 @ 1.0").unwrap();
        assert_eq!(net.n_species(), 2);
        assert_eq!(net.reactions.len(), 4);
        assert_eq!(net.species[0].name, "v1");
        assert_eq!(net.species[1].name, "v2");
        // Forward dimerization consumes two v1.
        assert_eq!(net.reactions[0].reactants.get(&0), Some(&2));
        assert_eq!(net.reactions[0].products.get(&1), Some(&1));
        // Backward produces two v1 from one v2.
        assert_eq!(net.reactions[1].reactants.get(&1), Some(&1));
        assert_eq!(net.reactions[1].products.get(&0), Some(&2));
        // Decays have empty product sides.
        assert!(net.reactions[2].products.is_empty());
        assert!(net.reactions[3].products.is_empty());
    }

    #[test]
    fn empty_input_is_the_empty_network() {
        let net = parse_crn("").unwrap();
        assert_eq!(net.n_species(), 0);
        assert!(net.reactions.is_empty());
        let net = parse_crn("# only a comment\n\n").unwrap();
        assert_eq!(net.n_species(), 0);
    }

    #[test]
    fn trimolecular_dsl() {
        let net = parse_crn("v1 + v2 <-> v3 @ 2.0, 3.0\nv1 -> 0 @ 1.0").unwrap();
        assert_eq!(net.n_species(), 3);
        assert_eq!(net.reactions.len(), 3);
        assert_eq!(net.reactions[0].rate, 2.0);
        assert_eq!(net.reactions[1].rate, 3.0);
        assert_eq!(net.reactions[2].rate, 1.0);
        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, 1.0]);
        let g = net.kinetics(&v).unwrap();
        assert_eq!(g.as_slice(), &[-2.0, -1.0, 1.0]);
    }

    #[test]
    fn production_from_empty_complex() {
        let net = parse_crn("0 -> v1 @ 0.5").unwrap();
        assert_eq!(net.n_species(), 1);
        assert!(net.reactions[0].reactants.is_empty());
    }

    #[test]
    fn error_positions() {
        let err = parse_crn("v1 -> v2 @ 1.0\nv1 -> @ 1.0").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.column, 7);
        assert_eq!(err.snippet, "v1 -> @ 1.0");

        let err = parse_crn("v1 -> 0 @ -2.0").unwrap_err();
        assert!(err.message.contains("nonnegative"));
        assert_eq!(err.line, 1);
        assert_eq!(err.column, 11);

        let err = parse_crn("v1 <-> v2 @ 1.0").unwrap_err();
        assert!(err.message.contains("two rates"));

        let err = parse_crn("v1 -> v2 @ 1.0 @ 2.0").unwrap_err();
        assert!(err.message.contains("duplicate '@'"));

        let err = parse_crn("v1 -> v2 @ 1.0, 2.0").unwrap_err();
        assert!(err.message.contains("single rate"));

        let err = parse_crn("0 + v1 -> v2 @ 1.0").unwrap_err();
        assert!(err.message.contains("stand alone"));

        let err = parse_crn("11 v1 -> 0 @ 1.0").unwrap_err();
        assert!(err.message.contains("1..=9"));
    }

    #[test]
    fn repeated_species_in_a_side_accumulate() {
        let net = parse_crn("v1 + v1 -> v2 @ 1.0").unwrap();
        assert_eq!(net.reactions[0].reactants.get(&0), Some(&2));
    }

    #[test]
    fn dsl_round_trip_on_corpus() {
        let corpus = [
            "2 v1 <-> v2 @ 1.0, 1.0\nv1 -> 0 @ 1.0\nv2 -> 0 @ 1.0",
            "v1 + v2 <-> v3 @ 2.0, 3.0\nv1 -> 0 @ 1.0",
            "v1 -> 0 @ 1.0",
            "a -> b @ 0.125\nb -> c @ 2.5e-3\na -> 0 @ 7.0\nc -> 0 @ 0.03125",
            "0 -> x @ 1.5\nx -> 0 @ 0.75",
        ];
        for text in corpus {
            let net = parse_crn(text).unwrap();
            let round = parse_crn(&network_to_dsl(&net)).unwrap();
            assert_eq!(net, round, "round trip changed {text:?}");
        }
    }

    proptest! {
        #[test]
        fn parser_never_panics(text in "\\PC*") {
            let _ = parse_crn(&text);
        }

        #[test]
        fn parser_never_panics_on_structured_garbage(
            lines in proptest::collection::vec("[ 0-9a-z@,<>+.#-]{0,30}", 0..6)
        ) {
            let _ = parse_crn(&lines.join("\n"));
        }

        #[test]
        fn failures_carry_positions(text in "[ 0-9a-z@,<>+.-]{1,40}") {
            if let Err(e) = parse_crn(&text) {
                prop_assert!(e.line >= 1);
                prop_assert!(e.column >= 1);
            }
        }
    }

    const MINIMAL_KS: &str = r#"
crn = "v1 -> 0 @ 1.0"
alpha = [2.0]
chi = 1.0
D = 1.0
D_tilde = [1.0]

[domain]
kind = "interval"
L = 3.141592653589793
"#;

    #[test]
    fn minimal_ks_model_file() {
        let model = parse_model(MINIMAL_KS).unwrap();
        assert_eq!(model.n_species(), 1);
        assert_eq!(model.chemoattractant, 0);
        let j = model
            .network
            .jacobian(&nalgebra::DVector::from_vec(vec![1.0]))
            .unwrap();
        assert_eq!(j[(0, 0)], -1.0);
        assert_eq!(model.alpha[0], 2.0);
        match model.domain {
            DomainSpec::Interval { length } => {
                assert_eq!(length, std::f64::consts::PI);
            }
            _ => panic!("expected interval"),
        }
    }

    #[test]
    fn alpha_without_positive_entry_is_rejected() {
        let text = MINIMAL_KS.replace("alpha = [2.0]", "alpha = [0.0]");
        let err = parse_model(&text).unwrap_err();
        assert!(err.to_string().contains("alpha has no positive entry"), "{err}");
    }

    #[test]
    fn full_ks_kinetics_matches_the_closed_form() {
        // v1 = enzyme, v3 = chemoattractant, v2 = enzyme/attractant complex;
        // binding r1, unbinding r_-1, degradation r2.
        let (r1, rm1, r2) = (1.25, 0.5, 0.75);
        let text = format!(
            r#"
crn = """
v1 + v3 -> v2 @ {r1}
v2 -> v1 + v3 @ {rm1}
v2 -> v1 @ {r2}
"""
alpha = [0.0, 1.0, 0.0]
chi = 1.0
D = 1.0
D_tilde = [1.0, 1.0, 1.0]
chemoattractant = "v3"

[domain]
kind = "interval"
L = 3.141592653589793
"#
        );
        let model = parse_model(&text).unwrap();
        assert_eq!(model.n_species(), 3);
        // Species order is first appearance: v1, v3, v2.
        assert_eq!(model.network.species[1].name, "v3");
        assert_eq!(model.chemoattractant, 1);
        let v = nalgebra::DVector::from_vec(vec![0.7, 1.3, 2.1]);
        let (enzyme, attractant, complex) = (v[0], v[1], v[2]);
        let g = model.network.kinetics(&v).unwrap();
        let expected = [
            -r1 * enzyme * attractant + (rm1 + r2) * complex,
            -r1 * enzyme * attractant + rm1 * complex,
            r1 * enzyme * attractant - (rm1 + r2) * complex,
        ];
        for (got, want) in g.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn crn_file_reference() {
        let dir = std::env::temp_dir().join("chemotax_parse_test");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("net.crn"), "v1 -> 0 @ 1.0\n").unwrap();
        let text = MINIMAL_KS.replace("\"v1 -> 0 @ 1.0\"", "\"net.crn\"");
        std::fs::write(dir.join("m.model"), &text).unwrap();
        let model = load_model(&dir.join("m.model")).unwrap();
        assert_eq!(model.n_species(), 1);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn toml_errors_carry_positions() {
        let err = parse_model("crn = \"v1 -> 0 @ 1.0\"\nchi = \"three\"\n").unwrap_err();
        match err {
            Error::Parse(p) => {
                assert_eq!(p.line, 2);
                assert!(p.column > 1);
            }
            other => panic!("expected parse error, got {other}"),
        }
        // Unknown keys are rejected.
        let err = parse_model(&format!("{MINIMAL_KS}\nbogus = 1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn rectangle_domain() {
        let text = MINIMAL_KS.replace(
            "kind = \"interval\"\nL = 3.141592653589793",
            "kind = \"rectangle\"\nLx = 3.141592653589793\nLy = 3.141592653589793",
        );
        let model = parse_model(&text).unwrap();
        assert!(matches!(model.domain, DomainSpec::Rectangle { .. }));
    }
}
