// SPDX-License-Identifier: Apache-2.0

//! Value-level semantics of every operator kind.
//!
//! Tokens are `width`-bit registers. Arithmetic wraps modulo 2^width,
//! comparisons and division read the register as two's complement, and the
//! logic operators are bitwise. A control token is true iff it is nonzero.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{OperatorKind, PortRole};

pub const MAX_WIDTH: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bus width {0} out of range 1..={MAX_WIDTH}")]
pub struct WidthError(pub i64);

/// Data-bus width in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u32")]
pub struct Width(u32);

impl Width {
    pub const DEFAULT: Width = Width(16);

    pub fn new(bits: i64) -> Result<Self, WidthError> {
        if (1..=MAX_WIDTH as i64).contains(&bits) {
            Ok(Width(bits as u32))
        } else {
            Err(WidthError(bits))
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn mask(self) -> u64 {
        (1u64 << self.0) - 1
    }

    /// Smallest signed value, `-2^(w-1)`.
    pub fn min_signed(self) -> i64 {
        -(1i64 << (self.0 - 1))
    }

    /// Largest signed value, `2^(w-1) - 1`.
    pub fn max_signed(self) -> i64 {
        (1i64 << (self.0 - 1)) - 1
    }

    /// Wraps any integer into a register value.
    pub fn wrap(self, value: i64) -> Token {
        Token(value as u64 & self.mask())
    }

    /// Encodes `value` if it is representable as either a signed or an
    /// unsigned `w`-bit number.
    pub fn encode(self, value: i64) -> Option<Token> {
        if value >= self.min_signed() && value <= self.mask() as i64 {
            Some(self.wrap(value))
        } else {
            None
        }
    }

    pub fn signed(self, token: Token) -> i64 {
        let v = token.0 & self.mask();
        let sign = 1u64 << (self.0 - 1);
        if v & sign != 0 {
            v as i64 - (1i64 << self.0)
        } else {
            v as i64
        }
    }
}

impl Default for Width {
    fn default() -> Self {
        Width::DEFAULT
    }
}

impl TryFrom<i64> for Width {
    type Error = WidthError;
    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Width::new(value)
    }
}

impl From<Width> for u32 {
    fn from(w: Width) -> u32 {
        w.0
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One item of data on an arc.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u64);

impl Token {
    pub const FALSE: Token = Token(0);
    pub const TRUE: Token = Token(1);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_true(self) -> bool {
        self.0 != 0
    }

    pub fn from_bool(b: bool) -> Token {
        if b {
            Token::TRUE
        } else {
            Token::FALSE
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evaluated {
    pub token: Token,
    /// Set when a division by zero produced the defined result 0.
    pub div_by_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0} is not a two-input primitive")]
pub struct NotPrimitive(pub OperatorKind);

pub fn eval_primitive(kind: OperatorKind, a: Token, b: Token, width: Width) -> Result<Evaluated, NotPrimitive> {
    use OperatorKind::*;
    let (ua, ub) = (a.0 & width.mask(), b.0 & width.mask());
    let (sa, sb) = (width.signed(a), width.signed(b));
    let mut div_by_zero = false;
    let token = match kind {
        Add => Token(ua.wrapping_add(ub) & width.mask()),
        Sub => Token(ua.wrapping_sub(ub) & width.mask()),
        Mul => Token(ua.wrapping_mul(ub) & width.mask()),
        Div => {
            if sb == 0 {
                div_by_zero = true;
                Token(0)
            } else {
                width.wrap(sa.wrapping_div(sb))
            }
        }
        And => Token(ua & ub),
        Or => Token(ua | ub),
        IfGt => Token::from_bool(sa > sb),
        IfGe => Token::from_bool(sa >= sb),
        IfLt => Token::from_bool(sa < sb),
        IfLe => Token::from_bool(sa <= sb),
        IfEq => Token::from_bool(sa == sb),
        IfDf => Token::from_bool(sa != sb),
        Copy | Not | DMerge | NDMerge | Branch => return Err(NotPrimitive(kind)),
    };
    Ok(Evaluated { token, div_by_zero })
}

/// Bitwise complement.
pub fn eval_not(a: Token, width: Width) -> Token {
    Token(!a.0 & width.mask())
}

pub fn eval_copy(a: Token) -> (Token, Token) {
    (a, a)
}

/// Controlled merge: a true control selects `a`, false selects `b`.
/// Returns `None` when the selected input is absent.
pub fn eval_dmerge(a: Option<Token>, b: Option<Token>, ctl: Token) -> Option<(PortRole, Token)> {
    if ctl.is_true() {
        a.map(|t| (PortRole::A, t))
    } else {
        b.map(|t| (PortRole::B, t))
    }
}

/// Uncontrolled merge. Each input is `(token, arrival tick)`; the earlier
/// arrival wins and port `a` wins a tie.
pub fn eval_ndmerge(a: Option<(Token, u64)>, b: Option<(Token, u64)>) -> Option<(PortRole, Token)> {
    match (a, b) {
        (Some((ta, at)), Some((tb, bt))) => {
            if bt < at {
                Some((PortRole::B, tb))
            } else {
                Some((PortRole::A, ta))
            }
        }
        (Some((ta, _)), None) => Some((PortRole::A, ta)),
        (None, Some((tb, _))) => Some((PortRole::B, tb)),
        (None, None) => None,
    }
}

/// Controlled switch: true routes the token to `t`, false to `f`.
pub fn eval_branch(a: Token, ctl: Token) -> (PortRole, Token) {
    if ctl.is_true() {
        (PortRole::T, a)
    } else {
        (PortRole::F, a)
    }
}
