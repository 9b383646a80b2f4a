//! The Pulp Fiction fragment and its published post-processed rows.

pub const FRAGMENT: &str = include_str!("../fixtures/pulp_fiction_fragment.txt");

/// `(line, scene, type, character, text)`.
pub const TABLE_ONE: [(usize, usize, &str, &str, &str); 6] = [
    (204, 4, "Scene", "", "EXT. APART.."),
    (205, 4, "Action", "", "Vincent and Jules."),
    (206, 4, "Action", "", "We TRACK..."),
    (207, 4, "Dial.", "VINCENT", "What's her name?"),
    (208, 4, "Dial.", "JULES", "Mia."),
    (209, 4, "Dial.", "VINCENT", "How did..."),
];
