use super::{DescriptionFacts, Group, HairColor, Item};

fn noun(group: Group) -> &'static str {
    match group {
        Group::Friend => "friend",
        Group::Family => "family member",
        Group::Caregiver => "caregiver",
        Group::Unknown => "unknown person",
    }
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "An",
        _ => "A",
    }
}

fn item_phrase(item: Item) -> &'static str {
    match item {
        Item::Gun => "a gun",
        Item::Knife => "a knife",
        Item::Scissors => "scissors",
        Item::BaseballBat => "a baseball bat",
        Item::IronBar => "an iron bar",
        Item::Eyeglass => "eyeglasses",
        Item::Mask => "a mask",
        Item::Cellphone => "a cellphone",
    }
}

/// "x", "x and y", "x, y, and z".
fn enumerate(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [a] => a.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Renders one person as
/// `<Article> <group>[, named <name>] [with <hair> hair, beard, and mustache]
/// [wearing eyeglasses] [who has <items>] [and wearing a mask] <location>`.
/// Facts that are unknown or absent contribute nothing.
pub fn compose_description(facts: &DescriptionFacts) -> String {
    let name = facts.identity.as_deref().map(squash).filter(|n| !n.is_empty());
    let group = if name.is_none() { Group::Unknown } else { facts.group };
    let head = noun(group);
    let mut out = format!("{} {head}", article(head));
    if let (Some(name), false) = (&name, group == Group::Unknown) {
        out.push_str(", named ");
        out.push_str(name);
    }

    let mut clauses = 0;
    let mut with = Vec::new();
    if facts.hair_color != HairColor::Unknown {
        with.push(format!("{} hair", facts.hair_color.as_str()));
    }
    if facts.has_beard.is_yes() {
        with.push("beard".to_string());
    }
    if facts.has_mustache.is_yes() {
        with.push("mustache".to_string());
    }
    if !with.is_empty() {
        out.push_str(" with ");
        out.push_str(&enumerate(&with));
        clauses += 1;
    }
    if facts.wears_eyeglasses() {
        out.push_str(" wearing eyeglasses");
        clauses += 1;
    }
    let carried: Vec<&str> = facts
        .items
        .iter()
        .filter(|i| !matches!(i, Item::Eyeglass | Item::Mask))
        .map(|&i| item_phrase(i))
        .collect();
    if !carried.is_empty() {
        out.push_str(" who has ");
        out.push_str(&carried.join(" and "));
        clauses += 1;
    }
    if facts.wears_mask() {
        out.push_str(if clauses > 0 { " and wearing a mask" } else { " wearing a mask" });
    }
    let location = squash(&facts.location);
    if !location.is_empty() {
        out.push(' ');
        out.push_str(&location);
    }
    out
}

/// One sentence per person, joined with "; ".
pub fn compose_scene(people: &[DescriptionFacts]) -> String {
    people.iter().map(compose_description).collect::<Vec<_>>().join("; ")
}
