use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SemanticsError;

pub type ClassId = u8;
pub const NUM_CLASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticClass {
    pub id: ClassId,
    pub name: String,
}

/// Exactly eight classes with unique ids in `0..8` and unique names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SemanticClass>", into = "Vec<SemanticClass>")]
pub struct ClassRegistry {
    classes: Vec<SemanticClass>,
}

impl ClassRegistry {
    pub fn new(mut classes: Vec<SemanticClass>) -> Result<Self, SemanticsError> {
        if classes.len() != NUM_CLASSES {
            return Err(SemanticsError::Registry(format!(
                "expected {NUM_CLASSES} classes, got {}",
                classes.len()
            )));
        }
        classes.sort_by_key(|c| c.id);
        for (i, c) in classes.iter().enumerate() {
            if c.id as usize != i {
                return Err(SemanticsError::Registry(format!(
                    "class ids must be 0..{NUM_CLASSES} without duplicates (saw {})",
                    c.id
                )));
            }
            if classes[..i].iter().any(|o| o.name == c.name) {
                return Err(SemanticsError::Registry(format!("duplicate name {:?}", c.name)));
            }
        }
        Ok(Self { classes })
    }

    /// Registry used by the synthetic benchmark.
    pub fn station() -> Self {
        let names = [
            "vent", "light", "handrail", "rack", "cargo_bag", "laptop", "hatch", "panel",
        ];
        Self {
            classes: names
                .iter()
                .enumerate()
                .map(|(i, n)| SemanticClass {
                    id: i as ClassId,
                    name: (*n).to_string(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SemanticsError> {
        let classes: Vec<SemanticClass> = serde_json::from_str(text)?;
        Self::new(classes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SemanticsError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn classes(&self) -> &[SemanticClass] {
        &self.classes
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().map(|c| c.id)
    }

    pub fn by_name(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.classes.get(id as usize).map(|c| c.name.as_str())
    }
}

impl Default for ClassRegistry {
    fn default() -> Self {
        Self::station()
    }
}

impl TryFrom<Vec<SemanticClass>> for ClassRegistry {
    type Error = SemanticsError;
    fn try_from(v: Vec<SemanticClass>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ClassRegistry> for Vec<SemanticClass> {
    fn from(r: ClassRegistry) -> Self {
        r.classes
    }
}
