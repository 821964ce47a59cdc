//! Row and column labels for policy matrices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::param::CategoricalParam;

/// An input or output symbol. Composed mechanisms emit tuples of their stage outputs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Param(CategoricalParam),
    Name(String),
    Tuple(Vec<Label>),
}

impl Label {
    pub fn name(s: impl Into<String>) -> Self {
        Label::Name(s.into())
    }

    pub fn as_param(&self) -> Option<&CategoricalParam> {
        match self {
            Label::Param(p) => Some(p),
            _ => None,
        }
    }
}

impl From<CategoricalParam> for Label {
    fn from(p: CategoricalParam) -> Self {
        Label::Param(p)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Param(p) => write!(f, "{p}"),
            Label::Name(s) => f.write_str(s),
            Label::Tuple(v) => {
                write!(f, "<")?;
                for (i, l) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{l}")?;
                }
                write!(f, ">")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untagged_json_shapes() {
        let p = Label::Param(CategoricalParam::new(2, vec![1, 1]).unwrap());
        let t = Label::Tuple(vec![p.clone(), Label::name("x")]);
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(j, r#"[{"tau":2,"counts":[1,1]},"x"]"#);
        let back: Label = serde_json::from_str(&j).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.to_string(), "<(1,1)/2;x>");
    }
}
