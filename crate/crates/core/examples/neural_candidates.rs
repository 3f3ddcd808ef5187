//! Runs the neural question generator interface against a stub backend
//! with an in-flight bound.

use subjq::neural::{generate, Bounded, GenerationRequest, StubGenerator, DEFAULT_N};

fn main() {
    let context = "Polio is caused by a virus";
    let mut stub = StubGenerator::new();
    stub.insert(
        context,
        "a virus",
        vec![
            "question: what causes polio".into(),
            "What causes polio?".into(),
            "Which virus causes polio?".into(),
            "How is polio spread?".into(),
        ],
    );
    let generator = Bounded::new(stub, 2);

    let request = GenerationRequest::new(context, "a virus", DEFAULT_N);
    for c in generate(&request, &generator) {
        println!("{:?} {}", c.provenance, c.text);
    }
}
