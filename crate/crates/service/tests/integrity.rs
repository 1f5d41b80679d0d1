mod common;

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn random_traffic_never_stores_a_broken_dataset() {
    for seed in 0..3 {
        let o = common::fuzz(400, seed).await;
        assert!(o.breaches.is_empty(), "seed {seed}: {:?}", o.breaches);
        assert!(o.accepted > 20, "seed {seed}: only {} writes accepted", o.accepted);
        assert!(o.rejected > 20 && o.conflicts > 5, "{o:?}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn simultaneous_writers_one_wins() {
    for frame in [30, 31, 45] {
        assert_eq!(common::race_writers(16, frame).await, (1, 15));
    }
}
