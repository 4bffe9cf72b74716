//! Deterministic instruction grammar:
//!
//! ```text
//! instruction := verb [object] prep target [height] [tolerance]
//! verb        := move | navigate | place
//! object      := [the] word
//! prep        := to | at | in | into | on | onto
//! target      := "(" num "," num ["," num] ")" | [the] landmark
//! landmark    := bottom right corner | bin center | bin centre
//! height      := [at] table height
//! tolerance   := [with] tolerance num
//! ```

use super::{resolve_position, RewardParams, TranslatorSource};
use crate::env::{Env, Goal, TABLE_HEIGHT};
use crate::error::{Error, Result};

const VERBS: &[&str] = &["move", "navigate", "place"];
const PREPS: &[&str] = &["to", "at", "in", "into", "on", "onto"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == '(' || c == ')' || c == ',' {
            out.push((
                i,
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => Tok::Comma,
                },
            ));
            i += 1;
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            while i < bytes.len()
                && (bytes[i].is_ascii_digit() || bytes[i] == b'.' || bytes[i] == b'e')
            {
                i += 1;
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| Error::Grammar {
                pos: start,
                msg: format!("bad number `{lit}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Word(text[start..i].to_ascii_lowercase())));
        } else {
            return Err(Error::Grammar {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

enum Target {
    Point { x: f64, y: f64, z: Option<f64> },
    BottomRightCorner,
    BinCenter,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    len: usize,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.len, |t| t.0)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn peek_word(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Grammar {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.peek_word() == Some(w) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.err(format!("expected `{w}`"))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.at += 1;
                Ok(v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn target(&mut self) -> Result<Target> {
        if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            let x = self.number()?;
            self.expect(Tok::Comma, "`,`")?;
            let y = self.number()?;
            let z = if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
                Some(self.number()?)
            } else {
                None
            };
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Target::Point { x, y, z });
        }
        self.eat_word("the");
        match self.peek_word() {
            Some("bottom") => {
                self.at += 1;
                self.expect_word("right")?;
                self.expect_word("corner")?;
                Ok(Target::BottomRightCorner)
            }
            Some("bin") => {
                self.at += 1;
                if self.eat_word("center") || self.eat_word("centre") {
                    Ok(Target::BinCenter)
                } else {
                    self.err("expected `center`")
                }
            }
            _ => self.err("expected a coordinate tuple or a landmark"),
        }
    }
}

/// Parses an instruction and resolves it against `env`'s layout.
pub fn parse_instruction(text: &str, env: &Env) -> Result<RewardParams> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        len: text.len(),
    };

    match p.peek_word() {
        Some(v) if VERBS.contains(&v) => p.at += 1,
        _ => return p.err("expected one of `move`, `navigate`, `place`"),
    }
    // Optional object phrase.
    if !p.peek_word().is_some_and(|w| PREPS.contains(&w)) {
        p.eat_word("the");
        match p.peek_word() {
            Some(w) if !PREPS.contains(&w) => p.at += 1,
            _ => return p.err("expected an object or a preposition"),
        }
    }
    match p.peek_word() {
        Some(w) if PREPS.contains(&w) => p.at += 1,
        _ => return p.err("expected a preposition such as `to`"),
    }
    let target = p.target()?;

    let mut table_height = false;
    let save = p.at;
    p.eat_word("at");
    if p.eat_word("table") {
        p.expect_word("height")?;
        table_height = true;
    } else {
        p.at = save;
    }

    let mut tolerance = None;
    let save = p.at;
    p.eat_word("with");
    if p.eat_word("tolerance") {
        tolerance = Some(p.number()?);
    } else {
        p.at = save;
    }
    if p.at < p.toks.len() {
        return p.err("unexpected trailing input");
    }

    let goal: Goal = match target {
        Target::Point { x, y, z } => {
            if table_height && z.is_some_and(|z| z != TABLE_HEIGHT) {
                return Err(Error::validation(
                    "both an explicit height and `table height` given",
                ));
            }
            resolve_position(env, x, y, if table_height { Some(TABLE_HEIGHT) } else { z })?
        }
        Target::BottomRightCorner => {
            let m = env
                .maze()
                .ok_or_else(|| Error::validation("`bottom right corner` is a maze landmark"))?;
            let (cx, cy) = m.bottom_right_corner();
            m.cell_center(cx, cy)
        }
        Target::BinCenter => {
            let c = env
                .bin_center()
                .ok_or_else(|| Error::validation("`bin center` needs a bin on the table"))?;
            [c[0], c[1], TABLE_HEIGHT]
        }
    };
    let params = RewardParams {
        goal,
        tolerance: tolerance.unwrap_or_else(|| env.tolerance()),
        feature_selector: env.kind().feature(),
        env_kind: env.kind(),
        source: TranslatorSource::Grammar,
    };
    params.validate(env)?;
    Ok(params)
}
