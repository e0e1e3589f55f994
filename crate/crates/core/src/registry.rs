//! Name-keyed registry of strategy factories.
//!
//! Backends, embedders and validation checks are all selected at runtime by
//! name from configuration. Each family keeps a [`Registry`] of factories
//! producing boxed trait objects from a shared settings type.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

type Factory<S, T> = Box<dyn Fn(&S) -> Result<Box<T>> + Send + Sync>;

pub struct Registry<S, T: ?Sized> {
    family: &'static str,
    factories: BTreeMap<String, Factory<S, T>>,
}

impl<S, T: ?Sized> Registry<S, T> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            factories: BTreeMap::new(),
        }
    }

    /// Registers a factory under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: impl Into<String>, factory: F)
    where
        F: Fn(&S) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, settings: &S) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(settings),
            None => Err(Error::Config(format!(
                "unknown {} `{}` (available: {})",
                self.family,
                name,
                self.names().collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Fixed(String);

    impl Greeter for Fixed {
        fn greet(&self) -> String {
            self.0.clone()
        }
    }

    #[test]
    fn creates_registered_strategy() {
        let mut reg: Registry<String, dyn Greeter> = Registry::new("greeter");
        reg.register("fixed", |s: &String| Ok(Box::new(Fixed(s.clone())) as Box<dyn Greeter>));
        let g = reg.create("fixed", &"hi".to_string()).unwrap();
        assert_eq!(g.greet(), "hi");
        assert!(reg.contains("fixed"));
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        let mut reg: Registry<(), dyn Greeter> = Registry::new("greeter");
        reg.register("a", |_| Ok(Box::new(Fixed("a".into())) as Box<dyn Greeter>));
        let err = reg.create("b", &()).err().unwrap().to_string();
        assert!(err.contains("unknown greeter `b`"));
        assert!(err.contains("available: a"));
    }
}
