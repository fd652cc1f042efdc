use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use stabsel::stability::{PferMethod, DEFAULT_EBIC_GAMMA};

/// A calibration strategy compared by the benchmark, written as in
/// `score-constrained(SS,20)` or `multiblock-blockwise(0.1,0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    ScoreUnconstrained,
    ScoreConstrained { pfer_method: PferMethod, eta: f64 },
    /// Fixed thresholds; the penalty is the least sparse one meeting the bound.
    ErrorControl { pfer_method: PferMethod, eta: f64, pis: Vec<f64> },
    Bic,
    Ebic { gamma: f64 },
    Aic,
    /// Score calibration ignoring the block structure, scored per block.
    SingleBlock,
    Blockwise { lambda0: Vec<f64> },
    Joint,
}

impl Method {
    /// Row labels produced by this method: one per threshold or per λ0 where it takes a list.
    pub fn labels(&self) -> Vec<String> {
        match self {
            Method::ErrorControl { pfer_method, eta, pis } => {
                pis.iter().map(|pi| format!("errorcontrol({pfer_method},{eta},{pi})")).collect()
            }
            Method::Blockwise { lambda0 } => lambda0.iter().map(|l| format!("multiblock-blockwise({l})")).collect(),
            m => vec![m.to_string()],
        }
    }

    pub fn needs_blocks(&self) -> bool {
        matches!(self, Method::Blockwise { .. } | Method::Joint)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Method::ScoreUnconstrained => write!(f, "score-unconstrained"),
            Method::ScoreConstrained { pfer_method, eta } => write!(f, "score-constrained({pfer_method},{eta})"),
            Method::ErrorControl { pfer_method, eta, pis } => write!(f, "errorcontrol({pfer_method},{eta},{})", list(pis)),
            Method::Bic => write!(f, "bic"),
            Method::Ebic { gamma } => write!(f, "ebic({gamma})"),
            Method::Aic => write!(f, "aic"),
            Method::SingleBlock => write!(f, "singleblock"),
            Method::Blockwise { lambda0 } => write!(f, "multiblock-blockwise({})", list(lambda0)),
            Method::Joint => write!(f, "multiblock-joint"),
        }
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("not a finite number: `{s}`"));
    }
    Ok(v)
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let Some(inner) = s[open + 1..].strip_suffix(')') else {
                    return Err(format!("unbalanced parentheses in `{s}`"));
                };
                (&s[..open], inner.split(',').map(str::trim).collect::<Vec<_>>())
            }
            None => (s, Vec::new()),
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
            }
        };
        let method = match name.trim().to_ascii_lowercase().as_str() {
            "score-unconstrained" => {
                arity(0)?;
                Method::ScoreUnconstrained
            }
            "score-constrained" => {
                arity(2)?;
                Method::ScoreConstrained { pfer_method: args[0].parse()?, eta: number(args[1])? }
            }
            "errorcontrol" => {
                if args.len() < 3 {
                    return Err("`errorcontrol` takes a PFER method, a bound and at least one threshold".into());
                }
                let pis = args[2..].iter().map(|a| number(a)).collect::<Result<Vec<_>, _>>()?;
                Method::ErrorControl { pfer_method: args[0].parse()?, eta: number(args[1])?, pis }
            }
            "bic" => {
                arity(0)?;
                Method::Bic
            }
            "aic" => {
                arity(0)?;
                Method::Aic
            }
            "ebic" => match args.len() {
                0 => Method::Ebic { gamma: DEFAULT_EBIC_GAMMA },
                _ => {
                    arity(1)?;
                    Method::Ebic { gamma: number(args[0])? }
                }
            },
            "singleblock" => {
                arity(0)?;
                Method::SingleBlock
            }
            "multiblock-blockwise" => match args.len() {
                0 => Method::Blockwise { lambda0: vec![stabsel::multiblock::DEFAULT_LAMBDA0] },
                _ => Method::Blockwise { lambda0: args.iter().map(|a| number(a)).collect::<Result<_, _>>()? },
            },
            "multiblock-joint" => {
                arity(0)?;
                Method::Joint
            }
            other => return Err(format!("unknown method `{other}`")),
        };
        method.validate()?;
        Ok(method)
    }
}

impl Method {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Method::ScoreConstrained { eta, .. } | Method::ErrorControl { eta, .. } if !(*eta > 0.0) => {
                return Err(format!("PFER bound must be positive, got {eta}"));
            }
            Method::ErrorControl { pis, .. } => {
                if let Some(pi) = pis.iter().find(|pi| !(**pi > 0.5 && **pi <= 1.0)) {
                    return Err(format!("thresholds must lie in (0.5, 1], got {pi}"));
                }
            }
            Method::Ebic { gamma } if !(*gamma >= 0.0) => return Err(format!("EBIC gamma must be nonnegative, got {gamma}")),
            Method::Blockwise { lambda0 } => {
                if let Some(l) = lambda0.iter().find(|l| !(**l >= 0.0)) {
                    return Err(format!("lambda0 must be nonnegative, got {l}"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl TryFrom<String> for Method {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Splits a comma-separated method list, keeping commas inside parentheses.
pub fn parse_method_list(s: &str) -> Result<Vec<Method>, String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].parse()?);
                start = i + 1;
            }
            _ => {}
        }
    }
    if !s[start..].trim().is_empty() {
        out.push(s[start..].parse()?);
    }
    Ok(out)
}
