//! Safety properties of the form `P=? [ F "label" ]`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed property `{0}`: expected P=? [ F \"label\" ]")]
pub struct PropertyError(pub String);

/// `P=? [ F "label" ]`: probability of eventually reaching a labelled state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SafetyProperty {
    pub target_label: String,
}

impl SafetyProperty {
    pub fn eventually(label: impl Into<String>) -> Self {
        SafetyProperty {
            target_label: label.into(),
        }
    }

    /// Whitespace-insensitive outside the quoted label.
    pub fn parse(text: &str) -> Result<Self, PropertyError> {
        let err = || PropertyError(text.to_string());
        let (head, rest) = text.split_once('"').ok_or_else(err)?;
        let (label, tail) = rest.split_once('"').ok_or_else(err)?;
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        if squash(head) != "P=?[F" || squash(tail) != "]" || label.is_empty() {
            return Err(err());
        }
        Ok(SafetyProperty::eventually(label))
    }

    /// Short form used in report tables: `P(F "label")`.
    pub fn short(&self) -> String {
        format!("P(F \"{}\")", self.target_label)
    }
}

impl fmt::Display for SafetyProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P=? [ F \"{}\" ]", self.target_label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_whitespace_variants() {
        for text in [r#"P=? [ F "bad" ]"#, r#"P=?[F"bad"]"#, "  P =?  [ F   \"bad\"  ] "] {
            assert_eq!(SafetyProperty::parse(text).unwrap().target_label, "bad");
        }
    }

    #[test]
    fn rejects_other_shapes() {
        for text in [r#"P>0.5 [ F "bad" ]"#, r#"P=? [ G "bad" ]"#, "P=? [ F bad ]", r#"P=? [ F "" ]"#, r#"P=? [ F "bad" ] x"#] {
            assert!(SafetyProperty::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn display_round_trips() {
        let p = SafetyProperty::eventually("no_energy");
        assert_eq!(SafetyProperty::parse(&p.to_string()).unwrap(), p);
        assert_eq!(p.short(), "P(F \"no_energy\")");
    }
}
