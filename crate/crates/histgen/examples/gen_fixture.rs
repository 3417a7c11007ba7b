fn main() {
    let dir = std::path::Path::new("/tmp/og_fixture/articles");
    let stats = histgen::synthetic::write_wikitext_fixture(dir, 60, 42).unwrap();
    println!("{} articles, mean sections {}", stats.articles, stats.mean_sections);
}
