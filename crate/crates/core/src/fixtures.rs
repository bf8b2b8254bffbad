//! Reference reports shared by tests, benches and downstream crates.

use crate::report::StructuredReport;

/// Unstructured report: narrative only, no template sections filled in.
pub const UNSTRUCTURED_DROPDOWNS: &str = include_str!("../fixtures/unstructured_dropdowns.txt");

/// Well-structured report in the canonical template layout.
pub const PRINT_PREVIEW: &str = include_str!("../fixtures/print_preview.txt");

/// A report that earns every CTQRS point.
pub fn golden_g1() -> StructuredReport {
    StructuredReport {
        title: "Bookmarks menu fails to save a new bookmark".into(),
        steps_to_reproduce: vec![
            "Open the browser and load any web page.".into(),
            "Click the Bookmarks button in the main toolbar.".into(),
            "Select \"Bookmark This Page\" from the menu.".into(),
            "Type a short name in the text field and press the Save button.".into(),
            "Open the Bookmarks menu again and look for the new entry.".into(),
        ],
        expected_result:
            "The new bookmark appears at the top of the Bookmarks menu and the dialog closes normally."
                .into(),
        actual_result:
            "Saving fails silently and the menu shows an error icon instead of the new bookmark."
                .into(),
        additional_information: "User Agent: Mozilla/5.0 (X11; Linux x86_64; rv:108.0) Gecko/20100101 Firefox/108.0.\nBuild ID: 20221215175817.\nThe problem also happens in a fresh profile with all extensions disabled.".into(),
        missing_fields: Default::default(),
    }
}
