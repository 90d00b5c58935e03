//! Reaction-file reader and writer.
//!
//! One reversible reaction per line:
//!
//! ```text
//! # comment
//! species: A, B, C            # optional; fixes the species order
//! r1: 2 A + B <-> C ; kf=1/2 kr=0.25
//! <-> A ; kf=1 kr=1           # empty side (or `0`) is the constant monomial
//! ```
//!
//! The forward rate `kf` belongs to the left-hand monomial and `kr` to the
//! right-hand one; the pair is then put in canonical order, so a reaction and
//! its mirror image with swapped rates produce the same event.
//!
//! Species are indexed in order of first appearance, counting `species:`
//! declarations. Rates accept integers, decimals (optionally with an
//! exponent) and fractions `p/q`, all converted exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num::{BigInt, BigRational, One, Zero};

use crate::error::{Error, Result};
use crate::system::{Event, EventSystem, Monomial, Rate};

struct RawReaction {
    line: usize,
    label: Option<String>,
    lhs: BTreeMap<usize, u32>,
    rhs: BTreeMap<usize, u32>,
    kf: Rate,
    kr: Rate,
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn starts_with(&self, s: &str) -> bool {
        let mut i = self.pos;
        for c in s.chars() {
            if self.chars.get(i) != Some(&c) {
                return false;
            }
            i += 1;
        }
        true
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        self.skip_ws();
        if self.starts_with(s) {
            self.pos += s.chars().count();
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => self.pos += 1,
            _ => return None,
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn integer(&mut self) -> Option<String> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    /// Consume a rate literal token (everything up to whitespace or `;`).
    fn rate_token(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == ';' {
                break;
            }
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }
}

/// Parse a rate literal: integer, decimal (with optional exponent) or `p/q`.
pub fn parse_rate(s: &str) -> Option<Rate> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_rate(p)?;
        let q = parse_rate(q)?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num::pow(ten, (-scale) as usize));
    }
    Some(if neg { -value } else { value })
}

fn species_id(species: &mut Vec<String>, name: &str) -> usize {
    match species.iter().position(|s| s == name) {
        Some(i) => i,
        None => {
            species.push(name.to_string());
            species.len() - 1
        }
    }
}

fn parse_side(cur: &mut Cursor, species: &mut Vec<String>, stop: &str) -> Result<BTreeMap<usize, u32>> {
    let mut side = BTreeMap::new();
    cur.skip_ws();
    if cur.starts_with(stop) {
        return Ok(side);
    }
    // `0` alone stands for the empty side
    let save = cur.pos;
    if cur.peek() == Some('0') {
        cur.pos += 1;
        cur.skip_ws();
        if cur.starts_with(stop) {
            return Ok(side);
        }
        cur.pos = save;
    }
    loop {
        cur.skip_ws();
        let coeff_pos = cur.pos;
        let coeff = match cur.integer() {
            Some(d) => {
                let c: u32 = d.parse().map_err(|_| {
                    cur.pos = coeff_pos;
                    cur.err("coefficient out of range")
                })?;
                if c == 0 {
                    cur.pos = coeff_pos;
                    return Err(cur.err("stoichiometric coefficient must be positive"));
                }
                c
            }
            None => 1,
        };
        cur.skip_ws();
        let name = cur.ident().ok_or_else(|| cur.err("expected species name"))?;
        let id = species_id(species, &name);
        *side.entry(id).or_insert(0) += coeff;
        cur.skip_ws();
        if cur.starts_with("+") {
            cur.pos += 1;
            continue;
        }
        if cur.starts_with(stop) {
            return Ok(side);
        }
        return Err(cur.err(format!("expected `+` or `{stop}`")));
    }
}

fn parse_rates(cur: &mut Cursor) -> Result<(Rate, Rate)> {
    let mut kf = None;
    let mut kr = None;
    loop {
        cur.skip_ws();
        if cur.at_end() {
            break;
        }
        let key_pos = cur.pos;
        let key = cur.ident().ok_or_else(|| cur.err("expected `kf=` or `kr=`"))?;
        cur.expect("=")?;
        cur.skip_ws();
        let value_pos = cur.pos;
        let token = cur.rate_token();
        let value = parse_rate(&token).ok_or_else(|| {
            cur.pos = value_pos;
            cur.err(format!("invalid rate literal `{token}`"))
        })?;
        let slot = match key.as_str() {
            "kf" => &mut kf,
            "kr" => &mut kr,
            _ => {
                cur.pos = key_pos;
                return Err(cur.err(format!("unknown rate key `{key}`")));
            }
        };
        if slot.is_some() {
            cur.pos = key_pos;
            return Err(cur.err(format!("`{key}` given twice")));
        }
        *slot = Some(value);
    }
    match (kf, kr) {
        (Some(f), Some(r)) => Ok((f, r)),
        (None, _) => Err(cur.err("missing `kf=`")),
        (_, None) => Err(cur.err("missing `kr=`")),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_species_decl(cur: &mut Cursor, species: &mut Vec<String>) -> Result<()> {
    loop {
        cur.skip_ws();
        if cur.at_end() {
            return Ok(());
        }
        let name = cur.ident().ok_or_else(|| cur.err("expected species name"))?;
        species_id(species, &name);
        cur.skip_ws();
        if cur.starts_with(",") {
            cur.pos += 1;
        }
    }
}

fn parse_reaction(cur: &mut Cursor, species: &mut Vec<String>) -> Result<RawReaction> {
    cur.skip_ws();
    // optional `label:`
    let save = cur.pos;
    let mut label = None;
    if let Some(name) = cur.ident() {
        cur.skip_ws();
        if cur.starts_with(":") {
            cur.pos += 1;
            label = Some(name);
        } else {
            cur.pos = save;
        }
    }
    let lhs = parse_side(cur, species, "<->")?;
    cur.expect("<->")?;
    let rhs = parse_side(cur, species, ";")?;
    cur.expect(";")?;
    let (kf, kr) = parse_rates(cur)?;
    Ok(RawReaction {
        line: cur.line,
        label,
        lhs,
        rhs,
        kf,
        kr,
    })
}

fn to_monomial(side: &BTreeMap<usize, u32>, n: usize) -> Monomial {
    let mut exps = vec![0; n];
    for (&i, &c) in side {
        exps[i] = c;
    }
    Monomial::new(exps)
}

/// Parse a reaction file into a canonical event-system.
pub fn parse_system(text: &str) -> Result<EventSystem> {
    let mut species = Vec::new();
    let mut raw = Vec::new();
    for (idx, full_line) in text.lines().enumerate() {
        let line = strip_comment(full_line);
        if line.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor::new(line, idx + 1);
        cur.skip_ws();
        if cur.starts_with("species") {
            let save = cur.pos;
            cur.pos += "species".len();
            cur.skip_ws();
            if cur.starts_with(":") {
                cur.pos += 1;
                parse_species_decl(&mut cur, &mut species)?;
                continue;
            }
            cur.pos = save;
        }
        raw.push(parse_reaction(&mut cur, &mut species)?);
    }
    if raw.is_empty() {
        return Err(Error::Syntax {
            line: text.lines().count().max(1),
            column: 1,
            message: "no reactions found".into(),
        });
    }

    let n = species.len();
    let mut events: Vec<Event> = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    for r in raw {
        let at_line = |e: Error| match e {
            Error::InvalidEvent(m) => Error::InvalidEvent(format!("line {}: {m}", r.line)),
            Error::Physicality(m) => Error::Physicality(format!("line {}: {m}", r.line)),
            other => other,
        };
        let event = Event::canonical(
            r.kf.clone(),
            to_monomial(&r.lhs, n),
            r.kr.clone(),
            to_monomial(&r.rhs, n),
        )
        .map_err(at_line)?;
        if let Some(k) = events.iter().position(|e| e == &event) {
            return Err(Error::Duplicate(format!(
                "line {}: same canonical event as reaction {} ({})",
                r.line,
                k + 1,
                event.display_with(&species)
            )));
        }
        events.push(event);
        labels.push(r.label);
    }
    EventSystem::with_labels(species, events, labels)
}

fn write_side(out: &mut String, mon: &Monomial, names: &[String]) {
    let mut first = true;
    for (i, &e) in mon.exponents().iter().enumerate() {
        if e == 0 {
            continue;
        }
        if !first {
            out.push_str(" + ");
        }
        first = false;
        if e != 1 {
            let _ = write!(out, "{e} ");
        }
        out.push_str(&names[i]);
    }
}

fn format_rate(r: &Rate) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn extend_order(order: &mut Vec<usize>, mon: &Monomial) {
    for (i, &x) in mon.exponents().iter().enumerate() {
        if x > 0 && !order.contains(&i) {
            order.push(i);
        }
    }
}

fn is_identity_prefix(order: &[usize]) -> bool {
    order.iter().enumerate().all(|(k, &i)| k == i)
}

/// Pick, per event, whether to write the first monomial on the left so that
/// re-reading discovers species in their stored order. Returns `None` when
/// no choice of orientations achieves that.
fn orientations(sys: &EventSystem) -> Option<Vec<bool>> {
    let mut order = Vec::new();
    let mut flips = Vec::with_capacity(sys.len());
    for e in sys.events() {
        let mut found = None;
        for flip in [false, true] {
            let (a, b) = if flip { (e.high(), e.low()) } else { (e.low(), e.high()) };
            let mut trial = order.clone();
            extend_order(&mut trial, a);
            extend_order(&mut trial, b);
            if is_identity_prefix(&trial) {
                found = Some((flip, trial));
                break;
            }
        }
        let (flip, trial) = found?;
        order = trial;
        flips.push(flip);
    }
    (order.len() == sys.dim()).then_some(flips)
}

/// Write an event-system in the reaction-file format. Each event becomes one
/// `lhs <-> rhs ; kf=.. kr=..` line. A `species:` line is emitted only when
/// first-appearance order cannot reproduce the stored species order.
pub fn serialize_system(sys: &EventSystem) -> String {
    let names = sys.species();
    let mut out = String::new();
    let flips = match orientations(sys) {
        Some(f) => f,
        None => {
            let _ = writeln!(out, "species: {}", names.join(", "));
            vec![false; sys.len()]
        }
    };
    for ((e, label), flip) in sys.events().iter().zip(sys.labels()).zip(flips) {
        let (lhs, kf, rhs, kr) = if flip {
            (e.high(), e.high_rate(), e.low(), e.low_rate())
        } else {
            (e.low(), e.low_rate(), e.high(), e.high_rate())
        };
        if let Some(l) = label {
            let _ = write!(out, "{l}: ");
        }
        write_side(&mut out, lhs, names);
        if !lhs.is_one() {
            out.push(' ');
        }
        out.push_str("<-> ");
        write_side(&mut out, rhs, names);
        let _ = writeln!(out, " ; kf={} kr={}", format_rate(kf), format_rate(kr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{rate, rate_int};

    fn names(sys: &EventSystem) -> Vec<String> {
        sys.species().to_vec()
    }

    fn show(sys: &EventSystem) -> Vec<String> {
        let n = names(sys);
        sys.events().iter().map(|e| e.display_with(&n).to_string()).collect()
    }

    #[test]
    fn rate_literals() {
        assert_eq!(parse_rate("0.5"), Some(rate(1, 2)));
        assert_eq!(parse_rate("1/3"), Some(rate(1, 3)));
        assert_eq!(parse_rate("12"), Some(rate_int(12)));
        assert_eq!(parse_rate("2.5e-1"), Some(rate(1, 4)));
        assert_eq!(parse_rate("1e3"), Some(rate_int(1000)));
        assert_eq!(parse_rate(".25"), Some(rate(1, 4)));
        assert_eq!(parse_rate("-2"), Some(rate_int(-2)));
        assert_eq!(parse_rate("1/0"), None);
        assert_eq!(parse_rate("abc"), None);
        assert_eq!(parse_rate(""), None);
    }

    #[test]
    fn multi_species_reactions() {
        let sys = parse_system("X1 + X2 <-> X3 ; kf=1/2 kr=1/3").unwrap();
        assert_eq!(show(&sys), ["1/3*X3 - 1/2*X1*X2"]);

        let sys = parse_system("3 X1 + 2 X2 <-> 2 X1 + 3 X6 ; kf=5 kr=7").unwrap();
        assert_eq!(show(&sys), ["7*X1^2*X6^3 - 5*X1^3*X2^2"]);

        let sys = parse_system(" <-> X1 ; kf=1 kr=1").unwrap();
        assert_eq!(show(&sys), ["1 - X1"]);
        let sys = parse_system("0 <-> X1 ; kf=1 kr=1").unwrap();
        assert_eq!(show(&sys), ["1 - X1"]);
    }

    #[test]
    fn direction_independence() {
        let a = parse_system("X1 <-> X2 ; kf=1/2 kr=1/3").unwrap();
        let b = parse_system("X1 <-> X2 ; kr=1/3 kf=1/2").unwrap();
        assert_eq!(a, b);
        assert_eq!(show(&a), ["1/3*X2 - 1/2*X1"]);
        let c = parse_system("species: X1, X2\nX2 <-> X1 ; kf=1/3 kr=1/2").unwrap();
        assert_eq!(a.events(), c.events());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_system("X1 <-> X1 ; kf=1 kr=2"),
            Err(Error::InvalidEvent(_))
        ));
        assert!(matches!(
            parse_system("A <-> B ; kf=1 kr=0"),
            Err(Error::Physicality(_))
        ));
        assert!(matches!(
            parse_system("A <-> B ; kf=-1 kr=2"),
            Err(Error::Physicality(_))
        ));
        assert!(matches!(
            parse_system("A <-> B ; kf=1 kr=2\nB <-> A ; kf=2 kr=1"),
            Err(Error::Duplicate(_))
        ));
        match parse_system("A <-> B ; kf=1\n") {
            Err(Error::Syntax { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_system("# header\nA + <-> B ; kf=1 kr=1") {
            Err(Error::Syntax { line: 2, column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_system("A -> B ; kf=1 kr=1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_system("0 A <-> B ; kf=1 kr=1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_system("# nothing\n"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn labels_comments_and_coefficients() {
        let text = "# a comment\n\nr1: 2A + B <-> C ; kf=0.5 kr=2 # trailing\nB + B <-> D;kf=1 kr=1\n";
        let sys = parse_system(text).unwrap();
        assert_eq!(sys.species(), ["A", "B", "C", "D"]);
        assert_eq!(sys.labels(), [Some("r1".to_string()), None]);
        assert_eq!(sys.events()[1].low().exponents(), &[0, 0, 0, 1]);
        assert_eq!(sys.events()[1].high().exponents(), &[0, 2, 0, 0]);
    }

    #[test]
    fn serialize_round_trip_examples() {
        let sys = parse_system("<-> X1 + X2 ; kf=6 kr=1\n2 X2 <-> X1 ; kf=2 kr=9").unwrap();
        let text = serialize_system(&sys);
        assert_eq!(text, "<-> X1 + X2 ; kf=6 kr=1\n2 X2 <-> X1 ; kf=2 kr=9\n");
        assert_eq!(parse_system(&text).unwrap(), sys);

        let single = parse_system("A <-> B ; kf=2 kr=1").unwrap();
        let text = serialize_system(&single);
        assert_eq!(text, "A <-> B ; kf=2 kr=1\n");
        assert_eq!(parse_system(&text).unwrap(), single);

        let empty = parse_system("t: <-> X1 ; kf=3/7 kr=1").unwrap();
        let text = serialize_system(&empty);
        assert_eq!(text, "t: <-> X1 ; kf=3/7 kr=1\n");
        assert_eq!(parse_system(&text).unwrap(), empty);

        let reordered = parse_system("species: B, A\nA <-> B ; kf=2 kr=1").unwrap();
        let text = serialize_system(&reordered);
        assert_eq!(parse_system(&text).unwrap(), reordered);
    }
}
