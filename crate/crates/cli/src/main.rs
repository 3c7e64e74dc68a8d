fn main() {
    println!("sfsi");
}
