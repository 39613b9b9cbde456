//! Samplers for the alternative distributions of the power study.
//!
//! The third argument of a univariate `NMix` is the standard deviation of the
//! shifted component, and `PVII<d>(nu)` has Student-t marginals with `nu`
//! degrees of freedom.
//!
//! Labels follow the notation of the power tables, with or without LaTeX
//! markup: `NMix(0.3,1,0.25)`, `NMix(0.5,0,B2)`, `t3`, `t5(0,I3)`,
//! `U(-sqrt3,sqrt3)`, `chi2_5`, `B(1,4)`, `Gamma(5,1)`, `Gum(1,2)`,
//! `W(1,0.5)`, `LN(0,1)`, `C2(0,1)`, `L3(0,1)`, `Gamma5(0.5,1)`,
//! `PVII2(10)`, `S3(Exp(1))`, `S2(B(1,2))`, `S5(chi2_5)`.

use std::fmt;

use rand::Rng;
use rand_distr::{
    Beta, Cauchy, ChiSquared, Distribution, Exp, Gamma, Gumbel, LogNormal, StandardNormal,
    StudentT, Weibull,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Substreams;
use crate::sample::Sample;

pub const GRAMMAR: &str = "supported labels:
  N(0,1) | N<d>(0,I<d>)                normal (null model)
  NMix(p,mu,sigma)                     (1-p) N(0,1) + p N(mu, sigma^2)
  NMix(p,mu,I<d>) | NMix(p,mu,B<d>)    (1-p) N_d(0,I) + p N_d(mu*1, I or B_d)
  t<nu> | t<nu>(0,I<d>)                Student t, univariate or multivariate
  U(-sqrt3,sqrt3) | U(lo,hi)           uniform
  chi2_<nu> | ChiSq(<nu>)              chi-square
  B(alpha,beta)                        beta
  Gamma(shape,rate)                    gamma
  Gum(location,scale)                  Gumbel
  W(scale,shape)                       Weibull
  LN(mu,sigma)                         lognormal
  C<d>(loc,scale) | L<d>(loc,scale)    iid Cauchy / logistic marginals
  Gamma<d>(shape,rate) | PVII<d>(nu)   iid gamma / Pearson VII marginals
  S<d>(Exp(rate)) | S<d>(B(a,b)) | S<d>(chi2_<nu>)  spherical, radius law given";

/// Covariance of the shifted component of a multivariate normal mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureCov {
    Identity,
    /// Unit diagonal, 0.9 off the diagonal.
    Equicorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Marginal {
    Cauchy {
        location: f64,
        scale: f64,
    },
    Logistic {
        location: f64,
        scale: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Student t with `theta` degrees of freedom, i.e. density proportional
    /// to `(1 + x^2/theta)^{-(theta + 1)/2}`.
    PearsonVII {
        theta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Radial {
    Exp { rate: f64 },
    Beta { alpha: f64, beta: f64 },
    ChiSq { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal,
    /// `sigma` is the standard deviation of the shifted component.
    NMix1 {
        p: f64,
        mu: f64,
        sigma: f64,
    },
    NMixD {
        p: f64,
        mu: f64,
        cov: MixtureCov,
    },
    StudentT {
        nu: f64,
    },
    MultiT {
        nu: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    ChiSq {
        nu: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    Gumbel {
        location: f64,
        scale: f64,
    },
    Weibull {
        scale: f64,
        shape: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    IidMarginal {
        marginal: Marginal,
    },
    Spherical {
        radial: Radial,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    #[serde(flatten)]
    pub family: Family,
    pub d: usize,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

fn probability(v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "mixture weight must lie in (0, 1), got {v}"
        )))
    }
}

impl AlternativeSpec {
    pub fn new(family: Family, d: usize) -> Result<Self> {
        let spec = Self { family, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let univariate = matches!(
            self.family,
            Family::NMix1 { .. }
                | Family::StudentT { .. }
                | Family::Uniform { .. }
                | Family::ChiSq { .. }
                | Family::Beta { .. }
                | Family::Gamma { .. }
                | Family::Gumbel { .. }
                | Family::Weibull { .. }
                | Family::LogNormal { .. }
        );
        if univariate && self.d != 1 {
            return Err(Error::invalid(format!(
                "{} is univariate but d = {}",
                self.family_name(),
                self.d
            )));
        }
        match self.family {
            Family::Normal => Ok(()),
            Family::NMix1 { p, mu, sigma } => {
                probability(p)?;
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            Family::NMixD { p, mu, .. } => {
                probability(p)?;
                finite("mu", mu)
            }
            Family::StudentT { nu } | Family::MultiT { nu } => positive("degrees of freedom", nu),
            Family::Uniform { lo, hi } => {
                finite("lo", lo)?;
                finite("hi", hi)?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "uniform needs lo < hi, got ({lo}, {hi})"
                    )))
                }
            }
            Family::ChiSq { nu } => positive("degrees of freedom", nu),
            Family::Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)
            }
            Family::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
            Family::Gumbel { location, scale } => {
                finite("location", location)?;
                positive("scale", scale)
            }
            Family::Weibull { scale, shape } => {
                positive("scale", scale)?;
                positive("shape", shape)
            }
            Family::LogNormal { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            Family::IidMarginal { marginal } => match marginal {
                Marginal::Cauchy { location, scale } | Marginal::Logistic { location, scale } => {
                    finite("location", location)?;
                    positive("scale", scale)
                }
                Marginal::Gamma { shape, rate } => {
                    positive("shape", shape)?;
                    positive("rate", rate)
                }
                Marginal::PearsonVII { theta } => positive("degrees of freedom", theta),
            },
            Family::Spherical { radial } => match radial {
                Radial::Exp { rate } => positive("rate", rate),
                Radial::Beta { alpha, beta } => {
                    positive("alpha", alpha)?;
                    positive("beta", beta)
                }
                Radial::ChiSq { nu } => positive("degrees of freedom", nu),
            },
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Normal => "Normal",
            Family::NMix1 { .. } => "NMix1",
            Family::NMixD { .. } => "NMixD",
            Family::StudentT { .. } => "StudentT",
            Family::MultiT { .. } => "MultiT",
            Family::Uniform { .. } => "Uniform",
            Family::ChiSq { .. } => "ChiSq",
            Family::Beta { .. } => "Beta",
            Family::Gamma { .. } => "Gamma",
            Family::Gumbel { .. } => "Gumbel",
            Family::Weibull { .. } => "Weibull",
            Family::LogNormal { .. } => "LogNormal",
            Family::IidMarginal { marginal } => match marginal {
                Marginal::Cauchy { .. } => "IIDMarginal(Cauchy)",
                Marginal::Logistic { .. } => "IIDMarginal(Logistic)",
                Marginal::Gamma { .. } => "IIDMarginal(Gamma)",
                Marginal::PearsonVII { .. } => "IIDMarginal(PearsonVII)",
            },
            Family::Spherical { radial } => match radial {
                Radial::Exp { .. } => "Spherical(Exp)",
                Radial::Beta { .. } => "Spherical(Beta)",
                Radial::ChiSq { .. } => "Spherical(ChiSq)",
            },
        }
    }

    /// Canonical label; parses back to the same spec.
    pub fn label(&self) -> String {
        let d = self.d;
        match self.family {
            Family::Normal if d == 1 => "N(0,1)".into(),
            Family::Normal => format!("N{d}(0,I{d})"),
            Family::NMix1 { p, mu, sigma } => format!("NMix({p},{mu},{sigma})"),
            Family::NMixD { p, mu, cov } => {
                let c = match cov {
                    MixtureCov::Identity => 'I',
                    MixtureCov::Equicorrelated => 'B',
                };
                format!("NMix({p},{mu},{c}{d})")
            }
            Family::StudentT { nu } => format!("t{nu}"),
            Family::MultiT { nu } => format!("t{nu}(0,I{d})"),
            Family::Uniform { lo, hi } if lo == -3f64.sqrt() && hi == 3f64.sqrt() => {
                "U(-sqrt3,sqrt3)".into()
            }
            Family::Uniform { lo, hi } => format!("U({lo},{hi})"),
            Family::ChiSq { nu } => format!("chi2_{nu}"),
            Family::Beta { alpha, beta } => format!("B({alpha},{beta})"),
            Family::Gamma { shape, rate } => format!("Gamma({shape},{rate})"),
            Family::Gumbel { location, scale } => format!("Gum({location},{scale})"),
            Family::Weibull { scale, shape } => format!("W({scale},{shape})"),
            Family::LogNormal { mu, sigma } => format!("LN({mu},{sigma})"),
            Family::IidMarginal { marginal } => match marginal {
                Marginal::Cauchy { location, scale } => format!("C{d}({location},{scale})"),
                Marginal::Logistic { location, scale } => format!("L{d}({location},{scale})"),
                Marginal::Gamma { shape, rate } => format!("Gamma{d}({shape},{rate})"),
                Marginal::PearsonVII { theta } => format!("PVII{d}({theta})"),
            },
            Family::Spherical { radial } => match radial {
                Radial::Exp { rate } => format!("S{d}(Exp({rate}))"),
                Radial::Beta { alpha, beta } => format!("S{d}(B({alpha},{beta}))"),
                Radial::ChiSq { nu } => format!("S{d}(chi2_{nu})"),
            },
        }
    }

    /// Family parameters as `key=value` pairs joined by `;`.
    pub fn params_string(&self) -> String {
        let v = serde_json::to_value(self.family).unwrap_or_default();
        let mut parts = Vec::new();
        flatten_params(&v, "", &mut parts);
        parts.join(";")
    }
}

fn flatten_params(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    if let serde_json::Value::Object(map) = v {
        for (k, val) in map {
            if k == "family" || k == "law" {
                continue;
            }
            match val {
                serde_json::Value::Object(_) => flatten_params(val, prefix, out),
                serde_json::Value::String(s) => out.push(format!("{prefix}{k}={s}")),
                other => out.push(format!("{prefix}{k}={other}")),
            }
        }
    }
}

impl fmt::Display for AlternativeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for AlternativeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_alternative(s)
    }
}

// ---------------------------------------------------------------------------
// Label parsing

fn normalize_label(label: &str) -> String {
    let mut s: String = label.chars().filter(|c| !c.is_whitespace()).collect();
    for markup in [
        "\\mathcal",
        "\\mathrm",
        "\\mbox",
        "\\rm",
        "\\left",
        "\\right",
    ] {
        s = s.replace(markup, "");
    }
    s = s
        .replace('Γ', "Gamma")
        .replace('χ', "chi")
        .replace('²', "^2")
        .replace('√', "sqrt")
        .replace('$', "")
        .replace(['{', '}', '\\'], "");
    for chi in ["chi^2_", "chi^2", "chi2_", "chisq", "ChiSq"] {
        s = s.replace(chi, "ChiSq");
    }
    s.replace(['^', '_'], "")
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let rest = self.rest();
        let end = rest.find(|c: char| !pred(c)).unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn name(&mut self) -> &'a str {
        self.take_while(|c| c.is_ascii_alphabetic())
    }

    fn number(&mut self) -> &'a str {
        self.take_while(|c| c.is_ascii_digit() || c == '.')
    }

    /// Comma-separated top-level arguments of a parenthesized group.
    fn args(&mut self) -> std::result::Result<Option<Vec<&'a str>>, String> {
        let rest = self.rest();
        if !rest.starts_with('(') {
            return Ok(None);
        }
        let mut depth = 0usize;
        let mut start = 1;
        let mut out = Vec::new();
        for (i, c) in rest.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        out.push(&rest[start..i]);
                        self.pos += i + 1;
                        return Ok(Some(out));
                    }
                }
                ',' if depth == 1 => {
                    out.push(&rest[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        Err("unbalanced parentheses".into())
    }
}

fn num(s: &str) -> std::result::Result<f64, String> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(b) => (-1.0, b),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let body = body.trim_start_matches('(').trim_end_matches(')');
    if let Some(arg) = body.strip_prefix("sqrt") {
        let v: f64 = arg
            .trim_start_matches('(')
            .trim_end_matches(')')
            .parse()
            .map_err(|_| format!("bad number {s:?}"))?;
        return Ok(sign * v.sqrt());
    }
    body.parse::<f64>()
        .map(|v| sign * v)
        .map_err(|_| format!("bad number {s:?}"))
}

fn arity(args: &[&str], want: usize, what: &str) -> std::result::Result<(), String> {
    if args.len() == want {
        Ok(())
    } else {
        Err(format!(
            "{what} takes {want} argument(s), got {}",
            args.len()
        ))
    }
}

/// `I<d>` or `B<d>`.
fn matrix_token(s: &str) -> Option<(MixtureCov, Option<usize>)> {
    let (cov, rest) = if let Some(r) = s.strip_prefix('I') {
        (MixtureCov::Identity, r)
    } else {
        (MixtureCov::Equicorrelated, s.strip_prefix('B')?)
    };
    let rest = rest.trim_start_matches('(').trim_end_matches(')');
    if rest.is_empty() || rest == "d" {
        return Some((cov, None));
    }
    rest.parse().ok().map(|d| (cov, Some(d)))
}

fn parse_radial(s: &str) -> std::result::Result<Radial, String> {
    let mut c = Cursor { src: s, pos: 0 };
    let name = c.name().to_ascii_lowercase();
    let trailing = c.number();
    let args = c.args()?.unwrap_or_default();
    if !c.rest().is_empty() {
        return Err(format!("unexpected trailing input {:?}", c.rest()));
    }
    match name.as_str() {
        "exp" => {
            arity(&args, 1, "Exp")?;
            Ok(Radial::Exp {
                rate: num(args[0])?,
            })
        }
        "b" | "beta" => {
            arity(&args, 2, "B")?;
            Ok(Radial::Beta {
                alpha: num(args[0])?,
                beta: num(args[1])?,
            })
        }
        "chisq" => {
            let nu = if !trailing.is_empty() {
                num(trailing)?
            } else {
                arity(&args, 1, "chi2")?;
                num(args[0])?
            };
            Ok(Radial::ChiSq { nu })
        }
        other => Err(format!("unknown radial law {other:?}")),
    }
}

fn parse_inner(label: &str) -> std::result::Result<AlternativeSpec, String> {
    let src = normalize_label(label);
    let mut c = Cursor { src: &src, pos: 0 };
    let name = c.name().to_string();
    let lname = name.to_ascii_lowercase();
    let digits = c.number();
    let args = c.args()?;
    if !c.rest().is_empty() {
        return Err(format!("unexpected trailing input {:?}", c.rest()));
    }
    let count = |what: &str| -> std::result::Result<Option<usize>, String> {
        if digits.is_empty() {
            Ok(None)
        } else {
            digits
                .parse()
                .map(Some)
                .map_err(|_| format!("{what}: bad dimension {digits:?}"))
        }
    };
    let no_digits = |what: &str| -> std::result::Result<(), String> {
        if digits.is_empty() {
            Ok(())
        } else {
            Err(format!("{what} takes no numeric suffix"))
        }
    };
    let args_or_empty = args.clone().unwrap_or_default();

    let spec = match lname.as_str() {
        "n" | "normal" => {
            let mut d = count("N")?;
            if let Some(a) = &args {
                arity(a, 2, "N")?;
                if let Some((MixtureCov::Identity, dd)) = matrix_token(a[1]) {
                    if let (Some(x), Some(y)) = (d, dd) {
                        if x != y {
                            return Err(format!("dimension {x} disagrees with I{y}"));
                        }
                    }
                    d = d.or(dd);
                } else if num(a[1])? != 1.0 {
                    return Err("only the standard normal N(0,1) is supported".into());
                }
                if num(a[0])? != 0.0 {
                    return Err("only the standard normal N(0,1) is supported".into());
                }
            }
            AlternativeSpec {
                family: Family::Normal,
                d: d.unwrap_or(1),
            }
        }
        "nmix" => {
            no_digits("NMix")?;
            arity(&args_or_empty, 3, "NMix")?;
            let p = num(args_or_empty[0])?;
            let mu = num(args_or_empty[1])?;
            match matrix_token(args_or_empty[2]) {
                Some((cov, Some(d))) => AlternativeSpec {
                    family: Family::NMixD { p, mu, cov },
                    d,
                },
                Some((_, None)) => return Err("NMix covariance needs a dimension, e.g. B2".into()),
                None => AlternativeSpec {
                    family: Family::NMix1 {
                        p,
                        mu,
                        sigma: num(args_or_empty[2])?,
                    },
                    d: 1,
                },
            }
        }
        "t" | "studentt" => {
            if digits.is_empty() {
                return Err("t needs degrees of freedom, e.g. t3".into());
            }
            let nu = num(digits)?;
            match &args {
                None => AlternativeSpec {
                    family: Family::StudentT { nu },
                    d: 1,
                },
                Some(a) => {
                    arity(a, 2, "t")?;
                    if num(a[0])? != 0.0 {
                        return Err("multivariate t must be centered at 0".into());
                    }
                    match matrix_token(a[1]) {
                        Some((MixtureCov::Identity, Some(d))) => AlternativeSpec {
                            family: Family::MultiT { nu },
                            d,
                        },
                        _ => return Err("multivariate t needs scale matrix I<d>".into()),
                    }
                }
            }
        }
        "u" | "uniform" => {
            no_digits("U")?;
            let (lo, hi) = match &args {
                None => (-3f64.sqrt(), 3f64.sqrt()),
                Some(a) => {
                    arity(a, 2, "U")?;
                    (num(a[0])?, num(a[1])?)
                }
            };
            AlternativeSpec {
                family: Family::Uniform { lo, hi },
                d: 1,
            }
        }
        "chisq" => {
            let nu = if !digits.is_empty() {
                if args.is_some() {
                    return Err("chi2 takes either a suffix or an argument".into());
                }
                num(digits)?
            } else {
                arity(&args_or_empty, 1, "chi2")?;
                num(args_or_empty[0])?
            };
            AlternativeSpec {
                family: Family::ChiSq { nu },
                d: 1,
            }
        }
        "b" | "beta" => {
            no_digits("B")?;
            arity(&args_or_empty, 2, "B")?;
            AlternativeSpec {
                family: Family::Beta {
                    alpha: num(args_or_empty[0])?,
                    beta: num(args_or_empty[1])?,
                },
                d: 1,
            }
        }
        "gamma" => {
            arity(&args_or_empty, 2, "Gamma")?;
            let shape = num(args_or_empty[0])?;
            let rate = num(args_or_empty[1])?;
            match count("Gamma")? {
                None => AlternativeSpec {
                    family: Family::Gamma { shape, rate },
                    d: 1,
                },
                Some(d) => AlternativeSpec {
                    family: Family::IidMarginal {
                        marginal: Marginal::Gamma { shape, rate },
                    },
                    d,
                },
            }
        }
        "gum" | "gumbel" => {
            no_digits("Gum")?;
            arity(&args_or_empty, 2, "Gum")?;
            AlternativeSpec {
                family: Family::Gumbel {
                    location: num(args_or_empty[0])?,
                    scale: num(args_or_empty[1])?,
                },
                d: 1,
            }
        }
        "w" | "weibull" => {
            no_digits("W")?;
            arity(&args_or_empty, 2, "W")?;
            AlternativeSpec {
                family: Family::Weibull {
                    scale: num(args_or_empty[0])?,
                    shape: num(args_or_empty[1])?,
                },
                d: 1,
            }
        }
        "ln" | "lognormal" => {
            no_digits("LN")?;
            arity(&args_or_empty, 2, "LN")?;
            AlternativeSpec {
                family: Family::LogNormal {
                    mu: num(args_or_empty[0])?,
                    sigma: num(args_or_empty[1])?,
                },
                d: 1,
            }
        }
        "c" | "cauchy" | "l" | "logistic" => {
            arity(&args_or_empty, 2, &name)?;
            let location = num(args_or_empty[0])?;
            let scale = num(args_or_empty[1])?;
            let marginal = if lname.starts_with('c') {
                Marginal::Cauchy { location, scale }
            } else {
                Marginal::Logistic { location, scale }
            };
            AlternativeSpec {
                family: Family::IidMarginal { marginal },
                d: count(&name)?.unwrap_or(1),
            }
        }
        "pvii" | "pearsonvii" => {
            arity(&args_or_empty, 1, "PVII")?;
            AlternativeSpec {
                family: Family::IidMarginal {
                    marginal: Marginal::PearsonVII {
                        theta: num(args_or_empty[0])?,
                    },
                },
                d: count("PVII")?.unwrap_or(1),
            }
        }
        "s" | "spherical" => {
            let d = count("S")?.ok_or("spherical family needs a dimension, e.g. S3(Exp(1))")?;
            arity(&args_or_empty, 1, "S")?;
            AlternativeSpec {
                family: Family::Spherical {
                    radial: parse_radial(args_or_empty[0])?,
                },
                d,
            }
        }
        "" => return Err("empty label".into()),
        other => return Err(format!("unknown family {other:?}")),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Parse a power-table row label into a spec.
pub fn parse_alternative(label: &str) -> Result<AlternativeSpec> {
    parse_inner(label).map_err(|reason| Error::AlternativeParse {
        label: label.to_string(),
        reason,
        grammar: GRAMMAR,
    })
}

// ---------------------------------------------------------------------------
// Sampling

fn dist_err(e: impl fmt::Display) -> Error {
    Error::invalid(e.to_string())
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm2 += *v * *v;
        }
        if norm2 > 0.0 {
            let inv = norm2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

fn logistic<R: Rng + ?Sized>(rng: &mut R, location: f64, scale: f64) -> f64 {
    // Open interval (0, 1).
    let u: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    location + scale * (u / (1.0 - u)).ln()
}

/// Draw `n` observations of `spec` as a row-major `n x d` buffer.
pub fn draw_rows<R: Rng + ?Sized>(
    spec: &AlternativeSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let d = spec.d;
    let mut out = vec![0.0; n * d];
    match spec.family {
        Family::Normal => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
        Family::NMix1 { p, mu, sigma } => {
            for v in &mut out {
                let z: f64 = rng.sample(StandardNormal);
                *v = if rng.random::<f64>() < p {
                    mu + sigma * z
                } else {
                    z
                };
            }
        }
        Family::NMixD { p, mu, cov } => {
            // B_d = 0.1 I + 0.9 11^T, so sqrt(0.1) z + sqrt(0.9) w 1 has covariance B_d.
            let (own, common) = (0.1f64.sqrt(), 0.9f64.sqrt());
            for row in out.chunks_exact_mut(d) {
                let shifted = rng.random::<f64>() < p;
                let w: f64 = rng.sample(StandardNormal);
                for v in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = match (shifted, cov) {
                        (false, _) => z,
                        (true, MixtureCov::Identity) => mu + z,
                        (true, MixtureCov::Equicorrelated) => mu + own * z + common * w,
                    };
                }
            }
        }
        Family::StudentT { nu } => {
            let t = StudentT::new(nu).map_err(dist_err)?;
            out.iter_mut().for_each(|v| *v = t.sample(rng));
        }
        Family::MultiT { nu } => {
            let chi = ChiSquared::new(nu).map_err(dist_err)?;
            for row in out.chunks_exact_mut(d) {
                let w: f64 = chi.sample(rng);
                let scale = (w / nu).sqrt().recip();
                for v in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = z * scale;
                }
            }
        }
        Family::Uniform { lo, hi } => out.iter_mut().for_each(|v| *v = rng.random_range(lo..hi)),
        Family::ChiSq { nu } => {
            let dist = ChiSquared::new(nu).map_err(dist_err)?;
            out.iter_mut().for_each(|v| *v = dist.sample(rng));
        }
        Family::Beta { alpha, beta } => {
            let dist = Beta::new(alpha, beta).map_err(dist_err)?;
            out.iter_mut().for_each(|v| *v = dist.sample(rng));
        }
        Family::Gamma { shape, rate } => {
            let dist = Gamma::new(shape, rate.recip()).map_err(dist_err)?;
            out.iter_mut().for_each(|v| *v = dist.sample(rng));
        }
        Family::Gumbel { location, scale } => {
            let dist = Gumbel::new(location, scale).map_err(dist_err)?;
            out.iter_mut().for_each(|v| *v = dist.sample(rng));
        }
        Family::Weibull { scale, shape } => {
            let dist = Weibull::new(scale, shape).map_err(dist_err)?;
            out.iter_mut().for_each(|v| *v = dist.sample(rng));
        }
        Family::LogNormal { mu, sigma } => {
            let dist = LogNormal::new(mu, sigma).map_err(dist_err)?;
            out.iter_mut().for_each(|v| *v = dist.sample(rng));
        }
        Family::IidMarginal { marginal } => match marginal {
            Marginal::Cauchy { location, scale } => {
                let dist = Cauchy::new(location, scale).map_err(dist_err)?;
                out.iter_mut().for_each(|v| *v = dist.sample(rng));
            }
            Marginal::Logistic { location, scale } => {
                out.iter_mut()
                    .for_each(|v| *v = logistic(rng, location, scale));
            }
            Marginal::Gamma { shape, rate } => {
                let dist = Gamma::new(shape, rate.recip()).map_err(dist_err)?;
                out.iter_mut().for_each(|v| *v = dist.sample(rng));
            }
            Marginal::PearsonVII { theta } => {
                let t = StudentT::new(theta).map_err(dist_err)?;
                out.iter_mut().for_each(|v| *v = t.sample(rng));
            }
        },
        Family::Spherical { radial } => {
            let radius: Box<dyn Fn(&mut R) -> f64> = match radial {
                Radial::Exp { rate } => {
                    let dist = Exp::new(rate).map_err(dist_err)?;
                    Box::new(move |r: &mut R| dist.sample(r))
                }
                Radial::Beta { alpha, beta } => {
                    let dist = Beta::new(alpha, beta).map_err(dist_err)?;
                    Box::new(move |r: &mut R| dist.sample(r))
                }
                Radial::ChiSq { nu } => {
                    let dist = ChiSquared::new(nu).map_err(dist_err)?;
                    Box::new(move |r: &mut R| dist.sample(r))
                }
            };
            for row in out.chunks_exact_mut(d) {
                unit_direction(rng, row);
                let r = radius(rng);
                row.iter_mut().for_each(|v| *v *= r);
            }
        }
    }
    Ok(out)
}

/// `n` i.i.d. draws from `spec`, reproducible from `seed`.
pub fn sample(spec: &AlternativeSpec, n: usize, seed: u64) -> Result<Sample> {
    let mut rng = Substreams::new(seed).stream(0);
    let rows = draw_rows(spec, n, &mut rng)?;
    let values = nalgebra::DMatrix::from_row_slice(n, spec.d, &rows);
    Sample::new(values, Some(format!("{} seed={seed}", spec.label())))
}

/// Mean of the radial law, for checks.
pub fn radial_mean(radial: Radial) -> f64 {
    match radial {
        Radial::Exp { rate } => rate.recip(),
        Radial::Beta { alpha, beta } => alpha / (alpha + beta),
        Radial::ChiSq { nu } => nu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(label: &str) -> AlternativeSpec {
        parse_alternative(label).unwrap_or_else(|e| panic!("{e}"))
    }

    #[test]
    fn univariate_mixture() {
        assert_eq!(
            p("NMix(0.3,1,0.25)"),
            AlternativeSpec {
                family: Family::NMix1 {
                    p: 0.3,
                    mu: 1.0,
                    sigma: 0.25
                },
                d: 1
            }
        );
    }

    #[test]
    fn multivariate_mixture() {
        assert_eq!(
            p("NMix(0.5,0,B2)"),
            AlternativeSpec {
                family: Family::NMixD {
                    p: 0.5,
                    mu: 0.0,
                    cov: MixtureCov::Equicorrelated
                },
                d: 2
            }
        );
        assert_eq!(p("NMix$(0.1,3,{\\rm I}_5)$").d, 5);
    }

    #[test]
    fn spherical_labels() {
        assert_eq!(
            p("S3(Exp(1))"),
            AlternativeSpec {
                family: Family::Spherical {
                    radial: Radial::Exp { rate: 1.0 }
                },
                d: 3
            }
        );
        assert_eq!(
            p("$\\mathcal{S}^2({\\rm B}(1,2))$").family,
            Family::Spherical {
                radial: Radial::Beta {
                    alpha: 1.0,
                    beta: 2.0
                }
            }
        );
        assert_eq!(
            p("$\\mathcal{S}^5(\\chi^2_5)$").family,
            Family::Spherical {
                radial: Radial::ChiSq { nu: 5.0 }
            }
        );
    }

    #[test]
    fn latex_table_labels() {
        assert_eq!(p("t$_3(0,{\\rm I}_2)$").family, Family::MultiT { nu: 3.0 });
        assert_eq!(p("t$_{10}$").family, Family::StudentT { nu: 10.0 });
        assert_eq!(p("$\\chi^2_{15}$").family, Family::ChiSq { nu: 15.0 });
        assert_eq!(
            p("U$(-\\sqrt{3},\\sqrt{3})$").family,
            Family::Uniform {
                lo: -3f64.sqrt(),
                hi: 3f64.sqrt()
            }
        );
        assert_eq!(p("$\\Gamma^2(0.5,1)$").d, 2);
        assert_eq!(
            p("$\\Gamma(1,5)$").family,
            Family::Gamma {
                shape: 1.0,
                rate: 5.0
            }
        );
        assert_eq!(p("C$^2(0,1)$").d, 2);
        assert_eq!(
            p("P$_{VII}^3(10)$").family,
            Family::IidMarginal {
                marginal: Marginal::PearsonVII { theta: 10.0 }
            }
        );
        assert_eq!(
            p("N$_2(0,{\\rm I}_2)$"),
            AlternativeSpec {
                family: Family::Normal,
                d: 2
            }
        );
        assert_eq!(p("N(0,1)").d, 1);
        assert_eq!(
            p("LN(0,1)").family,
            Family::LogNormal {
                mu: 0.0,
                sigma: 1.0
            }
        );
        assert_eq!(
            p("W(1,0.5)").family,
            Family::Weibull {
                scale: 1.0,
                shape: 0.5
            }
        );
        assert_eq!(
            p("Gum(1,2)").family,
            Family::Gumbel {
                location: 1.0,
                scale: 2.0
            }
        );
        assert_eq!(
            p("B(2,5)").family,
            Family::Beta {
                alpha: 2.0,
                beta: 5.0
            }
        );
    }

    #[test]
    fn unknown_label_lists_grammar() {
        let err = parse_alternative("Foo(1,2)").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown family"), "{msg}");
        assert!(msg.contains("supported labels"), "{msg}");
        assert!(parse_alternative("NMix(1.5,0,1)").is_err());
        assert!(parse_alternative("t0").is_err());
        assert!(parse_alternative("S3(Exp(1)").is_err());
    }

    #[test]
    fn params_string_lists_fields() {
        let s = p("NMix(0.5,0,B2)").params_string();
        assert!(
            s.contains("p=0.5") && s.contains("cov=equicorrelated"),
            "{s}"
        );
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let spec = p("t3(0,I2)");
        let a = sample(&spec, 50, 9).unwrap();
        let b = sample(&spec, 50, 9).unwrap();
        let c = sample(&spec, 50, 10).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }
}
