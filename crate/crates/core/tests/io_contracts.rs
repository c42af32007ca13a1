//! File formats shared with the feature extractor and the CLI.

use nalgebra::DMatrix;

use simspace::augment::{augment_dataset, png, propagate_labels, AugmentSpec, RasterImage};
use simspace::data::numbered_ids;
use simspace::io;
use simspace::{Embedding, Error, Seed, StimulusId};

#[test]
fn embedding_round_trip_is_within_1e_12() {
    let coords = DMatrix::from_fn(5, 3, |i, c| (i as f64 + 1.0) / 7.0 - (c as f64) * 1e-3 + if c == 2 { 1e5 } else { 0.0 });
    let e = Embedding::new(numbered_ids("n", 5), coords, 0.0123).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    io::write_embedding(&e, &path).unwrap();
    let back = io::load_embedding(&path).unwrap();
    assert_eq!(back.ids(), e.ids());
    assert!((back.coords() - e.coords()).abs().max() <= 1e-12);
    assert_eq!(back.stress1(), e.stress1());
}

/// The layout the Python extractor writes: header, one row per image.
#[test]
fn extractor_feature_csv_is_accepted() {
    let text = "item_id,group_id,f_0,f_1,f_2\n\
                cat_0,cat,0.5,1e-3,-2\n\
                cat_1,cat,0.25,0,1\n\
                dog_0,dog,1,2,3\n";
    let t = io::parse_feature_table(text).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t.width(), 3);
    assert_eq!(t.groups(), vec![StimulusId::new("cat").unwrap(), StimulusId::new("dog").unwrap()]);
    assert_eq!(t.row(0), vec![0.5, 1e-3, -2.0]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.csv");
    io::write_feature_table(&t, &path).unwrap();
    assert_eq!(io::load_feature_table(&path).unwrap(), t);
}

#[test]
fn malformed_feature_csvs_are_rejected() {
    assert!(matches!(
        io::parse_feature_table("item_id,group_id,f_0\na,g,1\nb,g,1,2\n"),
        Err(Error::RaggedFeatures { .. })
    ));
    assert!(matches!(
        io::parse_feature_table("id,group,f_0\na,g,1\n"),
        Err(Error::MalformedCsv(_))
    ));
    // Non-finite values load, and fitting rejects them.
    let nan = io::parse_feature_table("item_id,group_id,f_0\na,g,NaN\n").unwrap();
    assert!(matches!(
        simspace::mapping::RidgeSolver::new(nan.features(), None, false),
        Err(Error::NonFiniteFeatures(0))
    ));
    assert!(io::parse_feature_table("item_id,group_id,f_0\na,g,x\n").is_err());
}

#[test]
fn dissimilarity_csv_round_trip() {
    let text = ",a,b,c\na,0,1,2\nb,1,0,1.5\nc,2,1.5,0\n";
    let m = io::parse_dissimilarity_matrix(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    io::write_dissimilarity_matrix(&m, &path).unwrap();
    assert_eq!(io::load_dissimilarity_matrix(&path).unwrap(), m);
    assert!(io::parse_dissimilarity_matrix(",a,b,c\na,0,1,2\nb,1,0,1.5\nc,2,1.6,0\n").is_err());
}

#[test]
fn augmented_dataset_on_disk_matches_manifest() {
    let mut originals = std::collections::BTreeMap::new();
    for (k, name) in ["apple", "boat", "cloud"].iter().enumerate() {
        let img = RasterImage::from_fn(24, 16, |x, y| [(x * 10) as u8, (y * 15) as u8, (k * 80) as u8]).unwrap();
        originals.insert(StimulusId::new(*name).unwrap(), img);
    }
    let spec = AugmentSpec::default();
    let ds = augment_dataset(&originals, 4, &spec, Seed(9)).unwrap();
    assert_eq!(ds.items.len(), 12);
    assert_eq!(ds, augment_dataset(&originals, 4, &spec, Seed(9)).unwrap());
    assert_ne!(ds, augment_dataset(&originals, 4, &spec, Seed(10)).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let manifest = png::write_dataset(&ds, dir.path()).unwrap();
    let entries = io::load_manifest(&manifest).unwrap();
    assert_eq!(entries.len(), 12);
    for (entry, item) in entries.iter().zip(&ds.items) {
        assert_eq!(entry.item_id, item.item_id);
        assert_eq!(entry.group_id, item.group_id);
        let img = png::load_png(dir.path().join(&entry.file_path)).unwrap();
        assert_eq!(img, item.image);
    }

    let emb = Embedding::new(
        originals.keys().cloned().collect(),
        DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
        0.0,
    )
    .unwrap();
    let labels = propagate_labels(&ds, &emb).unwrap();
    for (item_id, target) in &labels.items {
        let group = item_id.split('#').next().unwrap();
        assert_eq!(Some(target.clone()), emb.point_of(group));
    }
}
