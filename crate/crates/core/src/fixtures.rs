//! Bundled scenes. Widget probabilities and semantic costs are illustrative.

use crate::error::{Error, Result};
use crate::scene::{load_scene, Scene};

pub const COFFEE_SHOP_JSON: &str = include_str!("../fixtures/coffee_shop.json");
pub const HOME_OFFICE_JSON: &str = include_str!("../fixtures/home_office.json");

pub const NAMES: [&str; 2] = ["coffee_shop", "home_office"];

pub fn coffee_shop() -> Scene {
    load_scene(COFFEE_SHOP_JSON).expect("bundled coffee_shop fixture is valid")
}

pub fn home_office() -> Scene {
    load_scene(HOME_OFFICE_JSON).expect("bundled home_office fixture is valid")
}

pub fn by_name(name: &str) -> Result<Scene> {
    match name {
        "coffee_shop" => Ok(coffee_shop()),
        "home_office" => Ok(home_office()),
        other => Err(Error::domain(format!("no bundled scene named `{other}`"))),
    }
}

/// Resolves a scene reference: a bundled fixture name, otherwise a file path.
pub fn resolve(reference: &str) -> Result<Scene> {
    if NAMES.contains(&reference) {
        return by_name(reference);
    }
    load_scene(&std::fs::read_to_string(reference)?)
}
