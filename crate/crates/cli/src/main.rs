fn main() {
    std::process::exit(lmdp_irl::run(std::env::args_os()));
}
