use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fields a screening predicate may reference.
pub const GERMPLASM_FIELDS: [&str; 14] = [
    "variety_name",
    "origin",
    "crude_protein",
    "lysine",
    "sedimentation_value",
    "stripe_rust",
    "leaf_rust",
    "powdery_mildew",
    "drought",
    "cold",
    "maturity",
    "plant_height",
    "thousand_grain_weight",
    "grain_hardness",
];

const RESISTANCE_TRAITS: [&str; 5] = ["stripe_rust", "leaf_rust", "powdery_mildew", "drought", "cold"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraitValue {
    Number(f64),
    Text(String),
}

impl TraitValue {
    fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if raw.is_empty() {
            None
        } else if let Ok(v) = raw.parse::<f64>() {
            Some(TraitValue::Number(v))
        } else {
            Some(TraitValue::Text(raw.to_string()))
        }
    }

    fn as_number(&self) -> Option<f64> {
        match self {
            TraitValue::Number(v) => Some(*v),
            TraitValue::Text(s) => s.parse().ok(),
        }
    }
}

impl fmt::Display for TraitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraitValue::Number(v) => write!(f, "{v}"),
            TraitValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    /// percent
    pub crude_protein: Option<f64>,
    /// percent
    pub lysine: Option<f64>,
    /// mL
    pub sedimentation_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Agronomic {
    /// Days to maturity or a maturity class such as `early`.
    pub maturity: Option<TraitValue>,
    /// cm
    pub plant_height: Option<f64>,
    /// g
    pub thousand_grain_weight: Option<f64>,
    pub grain_hardness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GermplasmRecord {
    pub variety_name: String,
    pub origin: String,
    pub quality: Quality,
    /// Resistance level per trait (`stripe_rust`, `drought`, ...).
    pub resistance: BTreeMap<String, String>,
    pub agronomic: Agronomic,
}

impl GermplasmRecord {
    /// Looks up a trait by field name. `Ok(None)` means the field exists but
    /// was not recorded for this variety.
    pub fn field(&self, name: &str) -> Result<Option<TraitValue>> {
        let num = |v: Option<f64>| v.map(TraitValue::Number);
        let text = |v: &str| Some(TraitValue::Text(v.to_string()));
        Ok(match name {
            "variety_name" => text(&self.variety_name),
            "origin" => text(&self.origin),
            "crude_protein" => num(self.quality.crude_protein),
            "lysine" => num(self.quality.lysine),
            "sedimentation_value" => num(self.quality.sedimentation_value),
            "maturity" => self.agronomic.maturity.clone(),
            "plant_height" => num(self.agronomic.plant_height),
            "thousand_grain_weight" => num(self.agronomic.thousand_grain_weight),
            "grain_hardness" => self.agronomic.grain_hardness.as_deref().and_then(text),
            t if RESISTANCE_TRAITS.contains(&t) => {
                self.resistance.get(t).map(|s| TraitValue::Text(s.clone()))
            }
            other => return Err(Error::UnknownField(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    /// Membership in a set of labels.
    In(Vec<String>),
}

/// One condition over a germplasm trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub field: String,
    pub op: CompareOp,
    /// Right-hand side for the comparison operators; unused by `In`.
    pub value: Option<TraitValue>,
}

impl Predicate {
    pub fn new(field: &str, op: CompareOp, value: TraitValue) -> Self {
        Self {
            field: field.to_string(),
            op,
            value: Some(value),
        }
    }

    pub fn one_of(field: &str, labels: &[&str]) -> Self {
        Self {
            field: field.to_string(),
            op: CompareOp::In(labels.iter().map(|s| s.to_string()).collect()),
            value: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !GERMPLASM_FIELDS.contains(&self.field.as_str()) {
            return Err(Error::UnknownField(self.field.clone()));
        }
        if !matches!(self.op, CompareOp::In(_)) && self.value.is_none() {
            return Err(Error::invalid(format!("predicate on `{}` has no value", self.field)));
        }
        Ok(())
    }

    /// Missing traits never match.
    pub fn matches(&self, record: &GermplasmRecord) -> Result<bool> {
        let Some(actual) = record.field(&self.field)? else {
            return Ok(false);
        };
        Ok(match (&self.op, &self.value) {
            (CompareOp::In(set), _) => {
                let s = actual.to_string();
                set.contains(&s)
            }
            (op, Some(expected)) => match (actual.as_number(), expected.as_number()) {
                (Some(a), Some(b)) => match op {
                    CompareOp::Lt => a < b,
                    CompareOp::Le => a <= b,
                    CompareOp::Gt => a > b,
                    CompareOp::Ge => a >= b,
                    CompareOp::Eq => a == b,
                    CompareOp::Ne => a != b,
                    CompareOp::In(_) => unreachable!(),
                },
                _ => match op {
                    CompareOp::Eq => actual.to_string() == expected.to_string(),
                    CompareOp::Ne => actual.to_string() != expected.to_string(),
                    _ => false,
                },
            },
            (_, None) => false,
        })
    }
}

impl FromStr for Predicate {
    type Err = Error;

    /// Accepts `field<=80`, `field>=14`, `field<x`, `field>x`, `field=x`,
    /// `field!=x` and `field in a|b|c`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((field, rest)) = s.split_once(" in ") {
            let labels: Vec<&str> = rest.split('|').map(str::trim).filter(|l| !l.is_empty()).collect();
            if labels.is_empty() {
                return Err(Error::invalid(format!("empty label set in `{s}`")));
            }
            let p = Predicate::one_of(field.trim(), &labels);
            p.validate()?;
            return Ok(p);
        }
        for (tok, op) in [
            ("<=", CompareOp::Le),
            (">=", CompareOp::Ge),
            ("!=", CompareOp::Ne),
            ("<", CompareOp::Lt),
            (">", CompareOp::Gt),
            ("=", CompareOp::Eq),
        ] {
            if let Some((field, value)) = s.split_once(tok) {
                let value = TraitValue::parse(value)
                    .ok_or_else(|| Error::invalid(format!("missing value in `{s}`")))?;
                let p = Predicate::new(field.trim(), op, value);
                p.validate()?;
                return Ok(p);
            }
        }
        Err(Error::invalid(format!("cannot parse predicate `{s}`")))
    }
}

/// Germplasm screening subtasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScreeningTarget {
    /// high quality
    HQ,
    /// disease resistance
    DS,
    /// drought resistance
    DR,
    /// maturity period
    MP,
    /// adapted to mechanized harvesting
    AM,
}

impl ScreeningTarget {
    pub const ALL: [ScreeningTarget; 5] = [
        ScreeningTarget::HQ,
        ScreeningTarget::DS,
        ScreeningTarget::DR,
        ScreeningTarget::MP,
        ScreeningTarget::AM,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ScreeningTarget::HQ => "HQ",
            ScreeningTarget::DS => "DS",
            ScreeningTarget::DR => "DR",
            ScreeningTarget::MP => "MP",
            ScreeningTarget::AM => "AM",
        }
    }
}

impl FromStr for ScreeningTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScreeningTarget::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown screening target `{s}`")))
    }
}

/// Threshold predicates behind each screening target. These are operator
/// configuration, not agronomic constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningDefaults {
    pub high_quality: Vec<Predicate>,
    pub disease_resistance: Vec<Predicate>,
    pub drought_resistance: Vec<Predicate>,
    pub maturity_period: Vec<Predicate>,
    pub mechanized: Vec<Predicate>,
}

impl Default for ScreeningDefaults {
    fn default() -> Self {
        let resistant = ["I", "HR", "R", "MR"];
        Self {
            high_quality: vec![
                Predicate::new("crude_protein", CompareOp::Ge, TraitValue::Number(14.0)),
                Predicate::new("sedimentation_value", CompareOp::Ge, TraitValue::Number(40.0)),
            ],
            disease_resistance: vec![
                Predicate::one_of("stripe_rust", &resistant),
                Predicate::one_of("leaf_rust", &resistant),
                Predicate::one_of("powdery_mildew", &resistant),
            ],
            drought_resistance: vec![Predicate::one_of("drought", &["1", "2", "HR", "R"])],
            maturity_period: vec![Predicate::one_of("maturity", &["early", "medium_early"])],
            mechanized: vec![Predicate::new("plant_height", CompareOp::Le, TraitValue::Number(80.0))],
        }
    }
}

impl ScreeningDefaults {
    pub fn criteria(&self, target: ScreeningTarget) -> &[Predicate] {
        match target {
            ScreeningTarget::HQ => &self.high_quality,
            ScreeningTarget::DS => &self.disease_resistance,
            ScreeningTarget::DR => &self.drought_resistance,
            ScreeningTarget::MP => &self.maturity_period,
            ScreeningTarget::AM => &self.mechanized,
        }
    }

    /// 0/1 flag per target for one record.
    pub fn flags(&self, record: &GermplasmRecord) -> Result<BTreeMap<ScreeningTarget, bool>> {
        ScreeningTarget::ALL
            .into_iter()
            .map(|t| {
                let mut ok = true;
                for p in self.criteria(t) {
                    ok &= p.matches(record)?;
                }
                Ok((t, ok))
            })
            .collect()
    }
}

/// Records satisfying every predicate, sorted by variety name.
pub fn screen_germplasm<'a>(
    records: &'a [GermplasmRecord],
    criteria: &[Predicate],
) -> Result<Vec<&'a GermplasmRecord>> {
    if criteria.is_empty() {
        return Err(Error::invalid("screening needs at least one criterion"));
    }
    for p in criteria {
        p.validate()?;
    }
    let mut out = Vec::new();
    'records: for r in records {
        for p in criteria {
            if !p.matches(r)? {
                continue 'records;
            }
        }
        out.push(r);
    }
    out.sort_by(|a, b| a.variety_name.cmp(&b.variety_name));
    Ok(out)
}

/// Reads `germplasm.csv`. Columns: `variety_name, origin, crude_protein,
/// lysine, sedimentation_value, stripe_rust, leaf_rust, powdery_mildew,
/// drought, cold, maturity, plant_height, thousand_grain_weight,
/// grain_hardness`; empty cells mean "not recorded".
pub fn read_germplasm<R: std::io::Read>(reader: R) -> Result<Vec<GermplasmRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let name_col = col("variety_name")
        .ok_or_else(|| Error::parse(1, "germplasm CSV lacks a variety_name column"))?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row?;
        let get = |name: &str| col(name).and_then(|c| row.get(c)).map(str::trim).unwrap_or("");
        let num = |name: &str| -> Result<Option<f64>> {
            let raw = get(name);
            if raw.is_empty() {
                return Ok(None);
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(line, format!("{name}: `{raw}` is not a number")))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::parse(line, format!("{name} must be non-negative")));
            }
            Ok(Some(v))
        };
        let variety_name = row.get(name_col).unwrap_or("").trim().to_string();
        if variety_name.is_empty() {
            return Err(Error::parse(line, "empty variety_name"));
        }
        let resistance = RESISTANCE_TRAITS
            .iter()
            .filter(|t| !get(t).is_empty())
            .map(|t| (t.to_string(), get(t).to_string()))
            .collect();
        let maturity = TraitValue::parse(get("maturity"));
        if let Some(TraitValue::Number(d)) = maturity {
            if d < 0.0 {
                return Err(Error::parse(line, "maturity must be non-negative"));
            }
        }
        let hardness = get("grain_hardness");
        out.push(GermplasmRecord {
            variety_name,
            origin: get("origin").to_string(),
            quality: Quality {
                crude_protein: num("crude_protein")?,
                lysine: num("lysine")?,
                sedimentation_value: num("sedimentation_value")?,
            },
            resistance,
            agronomic: Agronomic {
                maturity,
                plant_height: num("plant_height")?,
                thousand_grain_weight: num("thousand_grain_weight")?,
                grain_hardness: (!hardness.is_empty()).then(|| hardness.to_string()),
            },
        });
    }
    Ok(out)
}

pub fn load_germplasm(path: impl AsRef<Path>) -> Result<Vec<GermplasmRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_germplasm(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = "\
variety_name,origin,crude_protein,lysine,sedimentation_value,stripe_rust,leaf_rust,powdery_mildew,drought,cold,maturity,plant_height,thousand_grain_weight,grain_hardness
Zhoumai 22,Henan,13.1,0.36,28,MR,R,MS,2,R,medium,78,45.2,hard
Jimai 22,Shandong,14.2,0.38,42,R,R,R,3,R,medium_early,74,44.0,hard
Nongda 3486,Beijing,14.8,0.41,45,HR,MR,R,1,HR,early,86,42.1,hard
Yangmai 15,Jiangsu,11.2,0.33,21,S,MS,S,4,MS,early,92,39.8,soft
Xinong 979,Shaanxi,13.6,0.37,35,MR,MS,MR,2,R,medium,88,43.5,medium
";

    fn fixture() -> Vec<GermplasmRecord> {
        read_germplasm(FIXTURE.as_bytes()).unwrap()
    }

    fn names(rs: &[&GermplasmRecord]) -> Vec<String> {
        rs.iter().map(|r| r.variety_name.clone()).collect()
    }

    #[test]
    fn short_varieties() {
        let recs = fixture();
        let hits = screen_germplasm(&recs, &["plant_height<=80".parse().unwrap()]).unwrap();
        assert_eq!(names(&hits), ["Jimai 22", "Zhoumai 22"]);
    }

    #[test]
    fn empty_result_is_fine() {
        let recs = fixture();
        let hits = screen_germplasm(&recs, &["plant_height<10".parse().unwrap()]).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn unknown_field() {
        let recs = fixture();
        let p = Predicate::new("yield_potential", CompareOp::Ge, TraitValue::Number(1.0));
        assert!(matches!(screen_germplasm(&recs, &[p]), Err(Error::UnknownField(f)) if f == "yield_potential"));
        assert!(matches!("awns=yes".parse::<Predicate>(), Err(Error::UnknownField(_))));
    }

    #[test]
    fn label_sets_and_defaults() {
        let recs = fixture();
        let ds = ScreeningDefaults::default();
        let hq = screen_germplasm(&recs, ds.criteria(ScreeningTarget::HQ)).unwrap();
        assert_eq!(names(&hq), ["Jimai 22", "Nongda 3486"]);
        let dis = screen_germplasm(&recs, ds.criteria(ScreeningTarget::DS)).unwrap();
        assert_eq!(names(&dis), ["Jimai 22", "Nongda 3486"]);
        let dr = screen_germplasm(&recs, ds.criteria(ScreeningTarget::DR)).unwrap();
        assert_eq!(names(&dr), ["Nongda 3486", "Xinong 979", "Zhoumai 22"]);
        let flags = ds.flags(&recs[2]).unwrap();
        assert!(flags[&ScreeningTarget::HQ] && flags[&ScreeningTarget::MP]);
        assert!(!flags[&ScreeningTarget::AM]);
    }

    #[test]
    fn parses_predicates() {
        let p: Predicate = "stripe_rust in HR|R".parse().unwrap();
        assert_eq!(p.op, CompareOp::In(vec!["HR".into(), "R".into()]));
        let p: Predicate = "grain_hardness=hard".parse().unwrap();
        assert_eq!(p.value, Some(TraitValue::Text("hard".into())));
        assert!("plant_height".parse::<Predicate>().is_err());
    }

    #[test]
    fn rejects_negative_numbers() {
        let text = "variety_name,plant_height\nA,-3\n";
        assert!(read_germplasm(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn conjunction_is_intersection(h in 60.0f64..100.0, cp in 10.0f64..16.0) {
            let recs = fixture();
            let a = Predicate::new("plant_height", CompareOp::Le, TraitValue::Number(h));
            let b = Predicate::new("crude_protein", CompareOp::Ge, TraitValue::Number(cp));
            let both = names(&screen_germplasm(&recs, &[a.clone(), b.clone()]).unwrap());
            let only_a = names(&screen_germplasm(&recs, &[a]).unwrap());
            let only_b = names(&screen_germplasm(&recs, &[b]).unwrap());
            let inter: Vec<String> = only_a.into_iter().filter(|n| only_b.contains(n)).collect();
            prop_assert_eq!(both, inter);
        }
    }
}
