//! Shared builders for unit tests: the in-store shopping interfaces that
//! exercise every stage of the pipeline (a client that adds products with
//! separate quantity and promotion-code messages, a smart cart that expects
//! amount-then-item, and the role-level Add Product contract between them).

use crate::mapping::{Direction, HintSet, InterfaceSpec, Mep, OperationSpec};
use crate::schema::{FieldDecl, MessageSchema, PrimitiveKind, QName, SchemaRegistry, TypeNode};
use crate::synthesis::{
    ChoreoNode, ChoreographySpec, Edge, NodeKind, Polarity, ProtocolSpec, TaskNode, Transition,
};

pub fn leaf(name: &str, kind: PrimitiveKind) -> FieldDecl {
    FieldDecl {
        name: name.to_string(),
        node: TypeNode::Primitive(kind),
    }
}

pub fn record(name: &str, fields: Vec<FieldDecl>) -> FieldDecl {
    FieldDecl {
        name: name.to_string(),
        node: TypeNode::Record(fields),
    }
}

pub fn schema(qname: &str, fields: Vec<FieldDecl>) -> MessageSchema {
    MessageSchema::new(QName::parse(qname).unwrap(), TypeNode::Record(fields)).unwrap()
}

pub fn qn(text: &str) -> QName {
    QName::parse(text).unwrap()
}

pub const CD_CLIENT_SMARTCART: &str = "CD_Client_SmartCart";

pub fn cd_add_product_schema() -> MessageSchema {
    schema(
        "CD_Client_SmartCart.addProduct.addProductRequest",
        vec![
            record(
                "product",
                vec![
                    leaf("id", PrimitiveKind::String),
                    leaf("description", PrimitiveKind::String),
                ],
            ),
            leaf("quantity", PrimitiveKind::Int),
        ],
    )
}

pub fn client_add_product_schema() -> MessageSchema {
    schema(
        "Client.addProduct.addProductRequest",
        vec![record(
            "product",
            vec![
                leaf("id", PrimitiveKind::String),
                leaf("description", PrimitiveKind::String),
            ],
        )],
    )
}

pub fn client_set_quantity_schema() -> MessageSchema {
    schema(
        "Client.setQuantity.setQuantityRequest",
        vec![leaf("quantity", PrimitiveKind::Int)],
    )
}

pub fn client_promo_schema() -> MessageSchema {
    schema(
        "Client.setPromotionCode.setPromotionCodeRequest",
        vec![leaf("promotionCode", PrimitiveKind::String)],
    )
}

pub fn smartcart_set_amount_schema() -> MessageSchema {
    schema(
        "SmartCart.setAmount.setAmountRequest",
        vec![leaf("amount", PrimitiveKind::Int)],
    )
}

pub fn smartcart_add_item_schema() -> MessageSchema {
    schema(
        "SmartCart.addItem.addItemRequest",
        vec![record(
            "item",
            vec![
                leaf("itemCode", PrimitiveKind::String),
                leaf("descr", PrimitiveKind::String),
            ],
        )],
    )
}

/// Registry holding every in-store schema.
pub fn instore_registry() -> SchemaRegistry {
    let mut reg = SchemaRegistry::new();
    for s in [
        cd_add_product_schema(),
        client_add_product_schema(),
        client_set_quantity_schema(),
        client_promo_schema(),
        smartcart_set_amount_schema(),
        smartcart_add_item_schema(),
    ] {
        reg.insert(s).unwrap();
    }
    reg
}

fn one_way(name: &str, direction: Direction, input: &str) -> OperationSpec {
    OperationSpec {
        name: name.to_string(),
        direction,
        mep: Mep::OneWay,
        input: qn(input),
        output: None,
    }
}

pub fn client_interface() -> InterfaceSpec {
    InterfaceSpec::new(
        "Client",
        vec![
            one_way(
                "addProduct",
                Direction::Required,
                "Client.addProduct.addProductRequest",
            ),
            one_way(
                "setQuantity",
                Direction::Required,
                "Client.setQuantity.setQuantityRequest",
            ),
            one_way(
                "setPromotionCode",
                Direction::Required,
                "Client.setPromotionCode.setPromotionCodeRequest",
            ),
        ],
    )
    .unwrap()
}

pub fn smartcart_interface() -> InterfaceSpec {
    InterfaceSpec::new(
        "SmartCart",
        vec![
            one_way(
                "setAmount",
                Direction::Provided,
                "SmartCart.setAmount.setAmountRequest",
            ),
            one_way(
                "addItem",
                Direction::Provided,
                "SmartCart.addItem.addItemRequest",
            ),
        ],
    )
    .unwrap()
}

/// The delegate's face toward the client: it provides what the client's
/// role initiates.
pub fn cd_interface_toward_client() -> InterfaceSpec {
    InterfaceSpec::new(
        CD_CLIENT_SMARTCART,
        vec![one_way(
            "addProduct",
            Direction::Provided,
            "CD_Client_SmartCart.addProduct.addProductRequest",
        )],
    )
    .unwrap()
}

/// The delegate's face toward the cart: it requires what the target role
/// must receive.
pub fn cd_interface_toward_smartcart() -> InterfaceSpec {
    InterfaceSpec::new(
        CD_CLIENT_SMARTCART,
        vec![one_way(
            "addProduct",
            Direction::Required,
            "CD_Client_SmartCart.addProduct.addProductRequest",
        )],
    )
    .unwrap()
}

fn transition(from: &str, op: &str, polarity: Polarity, message: &str, to: &str) -> Transition {
    Transition {
        from: from.to_string(),
        operation: op.to_string(),
        polarity,
        message: qn(message),
        to: to.to_string(),
    }
}

/// The client's behavior: add, then quantity, optionally a promotion
/// code, then maybe loop back for the next product.
pub fn client_protocol() -> ProtocolSpec {
    use Polarity::Send;
    ProtocolSpec {
        name: "Client".to_string(),
        states: vec!["c0".into(), "c1".into(), "c2".into(), "c3".into()],
        initial: "c0".to_string(),
        finals: vec!["c0".into(), "c2".into(), "c3".into()],
        transitions: vec![
            transition("c0", "addProduct", Send, "Client.addProduct.addProductRequest", "c1"),
            transition("c1", "setQuantity", Send, "Client.setQuantity.setQuantityRequest", "c2"),
            transition(
                "c2",
                "setPromotionCode",
                Send,
                "Client.setPromotionCode.setPromotionCodeRequest",
                "c3",
            ),
            transition("c2", "addProduct", Send, "Client.addProduct.addProductRequest", "c1"),
            transition("c3", "addProduct", Send, "Client.addProduct.addProductRequest", "c1"),
        ],
    }
}

/// The cart's behavior: amount first, then the item, looping per round.
pub fn smartcart_protocol() -> ProtocolSpec {
    use Polarity::Receive;
    ProtocolSpec {
        name: "SmartCart".to_string(),
        states: vec!["p0".into(), "p1".into(), "p2".into()],
        initial: "p0".to_string(),
        finals: vec!["p0".into(), "p2".into()],
        transitions: vec![
            transition("p0", "setAmount", Receive, "SmartCart.setAmount.setAmountRequest", "p1"),
            transition("p1", "addItem", Receive, "SmartCart.addItem.addItemRequest", "p2"),
            transition("p2", "setAmount", Receive, "SmartCart.setAmount.setAmountRequest", "p1"),
        ],
    }
}

fn task(id: &str, initiator: &str, recipient: &str, op: &str, message: &str) -> ChoreoNode {
    ChoreoNode {
        id: id.to_string(),
        kind: NodeKind::Task(TaskNode {
            initiator: initiator.to_string(),
            recipient: recipient.to_string(),
            operation: op.to_string(),
            message: qn(message),
        }),
    }
}

fn plain(id: &str, kind: NodeKind) -> ChoreoNode {
    ChoreoNode { id: id.to_string(), kind }
}

fn edge(from: &str, to: &str) -> Edge {
    Edge { from: from.to_string(), to: to.to_string() }
}

/// The in-store contract: any number of Add Product interactions.
pub fn instore_choreography() -> ChoreographySpec {
    ChoreographySpec {
        name: "instore".to_string(),
        roles: vec!["Client".to_string(), "SmartCart".to_string()],
        nodes: vec![
            plain("start", NodeKind::Start),
            plain("g1", NodeKind::Exclusive),
            task(
                "addProduct",
                "Client",
                "SmartCart",
                "addProduct",
                "CD_Client_SmartCart.addProduct.addProductRequest",
            ),
            plain("end", NodeKind::End),
        ],
        edges: vec![
            edge("start", "g1"),
            edge("g1", "addProduct"),
            edge("addProduct", "g1"),
            edge("g1", "end"),
        ],
    }
}

/// A two-task loop — any interleaving of add and remove.
pub fn add_remove_choreography() -> ChoreographySpec {
    ChoreographySpec {
        name: "add-remove".to_string(),
        roles: vec!["Client".to_string(), "SmartCart".to_string()],
        nodes: vec![
            plain("start", NodeKind::Start),
            plain("g1", NodeKind::Exclusive),
            task(
                "add",
                "Client",
                "SmartCart",
                "addProduct",
                "CD_Client_SmartCart.addProduct.addProductRequest",
            ),
            task(
                "remove",
                "Client",
                "SmartCart",
                "removeProduct",
                "CD_Client_SmartCart.removeProduct.removeProductRequest",
            ),
            plain("end", NodeKind::End),
        ],
        edges: vec![
            edge("start", "g1"),
            edge("g1", "add"),
            edge("add", "g1"),
            edge("g1", "remove"),
            edge("remove", "g1"),
            edge("g1", "end"),
        ],
    }
}

/// The hint set that settles the promotion-code tie by rejecting both
/// tied candidates — the code corresponds to nothing the contract
/// carries.
pub fn promo_reject_hints() -> HintSet {
    HintSet::parse(
        "reject Client.setPromotionCode.setPromotionCodeRequest#promotionCode \
         -> CD_Client_SmartCart.addProduct.addProductRequest#product.id\n\
         reject Client.setPromotionCode.setPromotionCodeRequest#promotionCode \
         -> CD_Client_SmartCart.addProduct.addProductRequest#product.description\n",
    )
    .unwrap()
}
