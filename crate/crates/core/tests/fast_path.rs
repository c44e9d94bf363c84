mod common;

use treeval::cart::fit;
use treeval::truncation::{branch_of, pruned_report, sibling_fast_path};
use treeval::{Conditioning, Contrast, StoppingRule};

#[test]
fn sibling_fast_path_equals_generic_path() {
    let (mut used, mut total) = (0, 0);
    for seed in 0..40u64 {
        let mut rng = common::rng(100 + seed);
        let d = common::step_data(&mut rng, 40, 3, 1.0);
        let y = d.y();
        let lambda = [0.0, 1.0, 3.0, 6.0][seed as usize % 4];
        let tree = fit(&d, y, &StoppingRule::default(), lambda).unwrap();
        let ctx = Conditioning::from_fitted(&d, y, &tree);
        for parent in tree.internal() {
            let [a, _] = tree.regions()[parent].children.unwrap();
            let nu = Contrast::for_split(&tree, parent, y).unwrap();
            let branch = branch_of(&tree, a).unwrap();
            total += 1;
            if let Some(fast) = sibling_fast_path(&ctx, &branch, &nu).unwrap() {
                used += 1;
                let generic = pruned_report(&ctx, &branch, &nu).unwrap();
                assert!(fast.fast_path && !generic.fast_path);
                assert_eq!(fast.set, generic.set, "seed {seed} parent {parent}");
            }
        }
    }
    assert!(used * 2 > total, "fast path used on {used} of {total}");
}
