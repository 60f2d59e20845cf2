fn main() {
    println!("hqe-verify: suites not wired yet");
}
