fn main() {
    cpeps::cli::main();
}
