//! Template bank: phrasings per sub-type with `{slot}` placeholders.

use std::collections::BTreeMap;
use std::path::Path;

use super::Subtype;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBank {
    templates: BTreeMap<Subtype, Vec<String>>,
}

const DEFAULTS: [(Subtype, [&str; 2]); 21] = [
    (Subtype::Presence, ["Is there {a_class} in the image?", "Does the image contain {a_class}?"]),
    (Subtype::MountainPresence, ["Are there any mountains in the image?", "Does the image show mountainous terrain?"]),
    (Subtype::FloodPresence, ["Is this area prone to flooding?", "Is the area in the image exposed to a flood risk?"]),
    (Subtype::Count, ["How many {classes} are in the image?", "What is the number of {classes} in the image?"]),
    (Subtype::Density, ["What is the {classes} density?", "What share of the image is covered by {classes}?"]),
    (Subtype::Area, ["What is the area of {referent}?", "How large is {referent}?"]),
    (Subtype::Percentage, ["What percentage of the area is {class}?", "Which fraction of the image is covered by {class}?"]),
    (Subtype::AbsoluteLocation, ["Where is {referent}?", "In which part of the image is {referent}?"]),
    (
        Subtype::Water,
        [
            "What type of water body occupies the {extreme} area in the image?",
            "Which kind of water body covers the {extreme} surface in the image?",
        ],
    ),
    (
        Subtype::Vegetation,
        [
            "Which vegetation type occupies the {extreme} area in the image?",
            "What kind of vegetation covers the {extreme} surface in the image?",
        ],
    ),
    (
        Subtype::MountainName,
        ["What is the name of the mountain range in the image?", "Which mountain range is visible in the image?"],
    ),
    (Subtype::FloodLevel, ["What is the flood risk level?", "How high is the flood risk in this area?"]),
    (
        Subtype::FloodType,
        ["What is the nature of the flood risk in this area?", "Which kinds of flooding threaten this area?"],
    ),
    (
        Subtype::LandCover,
        [
            "Which land cover category occupies the {extreme} area in the image?",
            "What is the land cover class with the {extreme} extent in the image?",
        ],
    ),
    (
        Subtype::Urban,
        [
            "What is the urban classification of the area in the image?",
            "How urbanized is the area shown in the image?",
        ],
    ),
    (
        Subtype::Department,
        ["To which department does the area in the image belong to?", "In which department is the area in the image located?"],
    ),
    (
        Subtype::Region,
        ["To which region does the area in the image belong to?", "In which region is the area in the image located?"],
    ),
    (Subtype::Distance, ["What is the distance between {first} and {second}?", "How far apart are {first} and {second}?"]),
    (Subtype::Comparison, ["Are there more {classes1} than {classes2}?", "Does the image contain more {classes1} than {classes2}?"]),
    (
        Subtype::RelativeLocation,
        [
            "What is the relative position of {target} with respect to {reference}?",
            "Where is {target} located relative to {reference}?",
        ],
    ),
    (Subtype::Nearest, ["Where is the closest {class} to {pos}?", "Where is the {class} nearest to {pos}?"]),
];

/// Slots a sub-type's generator fills in.
pub fn slot_names(subtype: Subtype) -> &'static [&'static str] {
    match subtype {
        Subtype::Presence => &["a_class", "class", "classes"],
        Subtype::Count | Subtype::Density | Subtype::Percentage => &["class", "classes"],
        Subtype::Area | Subtype::AbsoluteLocation => &["referent", "class", "classes"],
        Subtype::Water | Subtype::Vegetation | Subtype::LandCover => &["extreme"],
        Subtype::Distance => &["first", "second"],
        Subtype::Comparison => &["classes1", "classes2"],
        Subtype::RelativeLocation => &["target", "reference"],
        Subtype::Nearest => &["class", "classes", "pos"],
        _ => &[],
    }
}

/// Placeholder names in order of appearance.
fn placeholders(template: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Config(format!("unclosed placeholder in template '{template}'")))?;
        out.push(&rest[open + 1..open + close]);
        rest = &rest[open + close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Config(format!("stray '}}' in template '{template}'")));
    }
    Ok(out)
}

impl Default for TemplateBank {
    fn default() -> Self {
        let templates = DEFAULTS
            .iter()
            .map(|(s, t)| (*s, t.iter().map(|x| x.to_string()).collect()))
            .collect();
        Self { templates }
    }
}

impl TemplateBank {
    /// Builds a bank from `{subtype: [templates]}`; sub-types not listed keep the defaults.
    pub fn with_overrides(overrides: BTreeMap<Subtype, Vec<String>>) -> Result<Self> {
        let mut bank = Self::default();
        for (subtype, list) in overrides {
            if list.is_empty() {
                return Err(Error::Config(format!("no template for sub-type '{subtype}'")));
            }
            let allowed = slot_names(subtype);
            for t in &list {
                for name in placeholders(t)? {
                    if !allowed.contains(&name) {
                        return Err(Error::Config(format!("template '{t}' uses unknown slot '{{{name}}}' for '{subtype}'")));
                    }
                }
            }
            bank.templates.insert(subtype, list);
        }
        Ok(bank)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let overrides: BTreeMap<Subtype, Vec<String>> = crate::json::read_json(path)?;
        Self::with_overrides(overrides)
    }

    pub fn len(&self, subtype: Subtype) -> usize {
        self.templates.get(&subtype).map_or(0, Vec::len)
    }

    pub fn templates(&self, subtype: Subtype) -> &[String] {
        self.templates.get(&subtype).map_or(&[], Vec::as_slice)
    }

    /// Renders template `index` of `subtype` with the given slot values.
    pub fn render(&self, subtype: Subtype, index: usize, slots: &[(&str, String)]) -> Result<String> {
        let template = self
            .templates(subtype)
            .get(index)
            .ok_or_else(|| Error::Config(format!("missing template {index} for sub-type '{subtype}'")))?;
        let mut out = String::with_capacity(template.len() + 32);
        let mut rest = template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = open + rest[open..].find('}').expect("validated template");
            let name = &rest[open + 1..close];
            let value = slots
                .iter()
                .find(|(k, _)| *k == name)
                .ok_or_else(|| Error::Config(format!("slot '{name}' not available for sub-type '{subtype}'")))?;
            out.push_str(&value.1);
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_subtype_has_two_templates_with_valid_slots() {
        let bank = TemplateBank::default();
        for s in Subtype::ALL {
            assert_eq!(bank.len(s), 2, "{s}");
            for t in bank.templates(s) {
                for p in placeholders(t).unwrap() {
                    assert!(slot_names(s).contains(&p), "{s}: {p}");
                }
            }
        }
    }

    #[test]
    fn example_phrasings() {
        let bank = TemplateBank::default();
        let count = bank.render(Subtype::Count, 0, &[("classes", "buildings".into())]).unwrap();
        assert_eq!(count, "How many buildings are in the image?");
        let nearest = bank
            .render(Subtype::Nearest, 0, &[("class", "road".into()), ("pos", "(142, 221)".into())])
            .unwrap();
        assert_eq!(nearest, "Where is the closest road to (142, 221)?");
    }

    #[test]
    fn overrides_are_checked() {
        let mut o = BTreeMap::new();
        o.insert(Subtype::Count, vec!["Count the {classes}.".to_string()]);
        let bank = TemplateBank::with_overrides(o).unwrap();
        assert_eq!(bank.len(Subtype::Count), 1);
        assert_eq!(bank.len(Subtype::Area), 2);

        let mut bad = BTreeMap::new();
        bad.insert(Subtype::Count, vec!["Count the {things}.".to_string()]);
        assert!(matches!(TemplateBank::with_overrides(bad), Err(Error::Config(_))));
        let mut empty = BTreeMap::new();
        empty.insert(Subtype::Area, vec![]);
        assert!(TemplateBank::with_overrides(empty).is_err());
        assert!(matches!(bank.render(Subtype::Count, 3, &[]), Err(Error::Config(_))));
    }
}
