//! Description sentences and threat levels from hand-written fact sets.
//!
//!     cargo run --example describe

use doorwatch::description::{
    assess_threat, compose_description, compose_scene, DescriptionFacts, Group, HairColor, Item, Tri,
};

fn main() {
    let mut john = DescriptionFacts::known("John", Group::Friend, "in front of the entrance");
    john.hair_color = HairColor::Black;
    john.has_beard = Tri::Yes;
    john.has_mustache = Tri::Yes;
    john.has_eyeglasses = Tri::Yes;

    let mut stranger = DescriptionFacts::unknown("at the back door");
    stranger.items.insert(Item::Gun);
    stranger.has_mask = Tri::Yes;

    let mut nurse = DescriptionFacts::known("Ruth", Group::Caregiver, "at the front door");
    nurse.hair_color = HairColor::White;
    nurse.items.insert(Item::Cellphone);

    let mut courier = DescriptionFacts::unknown("at the front door");
    courier.has_eyeglasses = Tri::No;

    for f in [&john, &stranger, &nurse, &courier] {
        println!("[{:<6}] {}", assess_threat(f).to_string(), compose_description(f));
    }
    println!("\nscene: {}", compose_scene(&[john, stranger]));
}
