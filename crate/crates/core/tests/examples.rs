macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(annuity_multipliers, "annuity_multipliers.rs");
example!(ingest_filter, "ingest_filter.rs");
example!(share_curves, "share_curves.rs");
example!(price_catalog, "price_catalog.rs");
example!(market_comparison, "market_comparison.rs");
example!(synthetic_pipeline, "synthetic_pipeline.rs");
