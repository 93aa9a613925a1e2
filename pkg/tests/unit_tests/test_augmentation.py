# builtins
import unittest
import unittest.mock as mock

# third party
import requests

# modules
import src.augmentation as augmentation
import src.constants as constants
import src.exceptions as exceptions


UND_ITEM = augmentation.Quadruple(
    id="u1", image="img/u1.png", caption="", question="How many bars?", answer="3",
    origin=constants.Side.UNDERSTANDING,
)
GEN_ITEM = augmentation.Quadruple(
    id="g1", image="img/g1.png", caption="a red bicycle", question="", answer="",
    origin=constants.Side.GENERATION,
)


def caption_request(quadruple: augmentation.Quadruple = UND_ITEM) -> augmentation.AugmentationRequest:
    return augmentation.AugmentationRequest(constants.AugmentationDirection.COMPLETE_CAPTION, quadruple, "caption-v1")


def qa_request(quadruple: augmentation.Quadruple = GEN_ITEM) -> augmentation.AugmentationRequest:
    return augmentation.AugmentationRequest(constants.AugmentationDirection.COMPLETE_QA, quadruple, "qa-v1")


class FixedClient(augmentation.AugmentationClient):

    def __init__(self, completion: dict) -> None:
        self.completion: dict = completion

    def complete(self, request: augmentation.AugmentationRequest) -> dict:
        return self.completion


class TestRequestAugmentation(unittest.TestCase):

    def test_stub_completes_caption(self) -> None:
        completed = augmentation.request_augmentation(caption_request(), augmentation.StubAugmentationClient())
        self.assertTrue(completed.is_complete)
        self.assertTrue(completed.caption.startswith("[caption-v1]"))
        self.assertEqual((completed.question, completed.answer), (UND_ITEM.question, UND_ITEM.answer))

    def test_stub_completes_qa(self) -> None:
        completed = augmentation.request_augmentation(qa_request(), augmentation.StubAugmentationClient())
        self.assertTrue(completed.is_complete)
        self.assertEqual(completed.caption, "a red bicycle")
        self.assertEqual(completed.answer, "a red bicycle")

    def test_stub_is_deterministic(self) -> None:
        client = augmentation.StubAugmentationClient()
        self.assertEqual(
            augmentation.request_augmentation(caption_request(), client),
            augmentation.request_augmentation(caption_request(), client),
        )

    def test_malformed_request(self) -> None:
        without_answer = augmentation.Quadruple("u2", "img", "", "question", "", constants.Side.UNDERSTANDING)
        with self.assertRaises(exceptions.MalformedRequest):
            augmentation.request_augmentation(caption_request(without_answer), augmentation.StubAugmentationClient())
        with self.assertRaises(exceptions.MalformedRequest):
            augmentation.request_augmentation(qa_request(UND_ITEM), augmentation.StubAugmentationClient())

    def test_malformed_completion(self) -> None:
        for completion in ({}, {"caption": ""}, {"caption": 7}):
            with self.assertRaises(exceptions.MalformedCompletion):
                augmentation.request_augmentation(caption_request(), FixedClient(completion))
        with self.assertRaises(exceptions.MalformedCompletion):
            augmentation.request_augmentation(qa_request(), FixedClient({"question": "q"}))

    def test_make_client(self) -> None:
        self.assertIsInstance(augmentation.make_client("stub"), augmentation.StubAugmentationClient)
        self.assertIsInstance(augmentation.make_client("remote", "http://augment"), augmentation.RemoteAugmentationClient)
        with self.assertRaises(exceptions.ConfigError):
            augmentation.make_client("oracle")


class TestRemoteClient(unittest.TestCase):

    def setUp(self) -> None:
        self.client = augmentation.RemoteAugmentationClient("http://augment.local/complete", timeout=2.0)

    def response(self, status: int, body: object = None, error: Exception | None = None) -> mock.Mock:
        reply: mock.Mock = mock.Mock(status_code=status, text="reply")
        if error is not None:
            reply.json.side_effect = error
        else:
            reply.json.return_value = body
        return reply

    @mock.patch("src.augmentation.requests.post")
    def test_posts_payload(self, post: mock.Mock) -> None:
        post.return_value = self.response(200, {"caption": "three bars"})
        completed = augmentation.request_augmentation(caption_request(), self.client)
        self.assertEqual(completed.caption, "three bars")
        _, kwargs = post.call_args
        self.assertEqual(kwargs["json"]["direction"], "complete_caption")
        self.assertEqual(kwargs["json"]["quadruple"]["id"], "u1")
        self.assertEqual(kwargs["timeout"], 2.0)

    @mock.patch("src.augmentation.requests.post")
    def test_unreachable(self, post: mock.Mock) -> None:
        post.side_effect = requests.exceptions.ConnectionError("refused")
        with self.assertRaises(exceptions.ClientUnavailable):
            augmentation.request_augmentation(caption_request(), self.client)

    @mock.patch("src.augmentation.requests.post")
    def test_server_error(self, post: mock.Mock) -> None:
        post.return_value = self.response(503, {})
        with self.assertRaises(exceptions.ClientUnavailable):
            augmentation.request_augmentation(caption_request(), self.client)

    @mock.patch("src.augmentation.requests.post")
    def test_undecodable_reply(self, post: mock.Mock) -> None:
        post.return_value = self.response(200, error=ValueError("no json"))
        with self.assertRaises(exceptions.MalformedCompletion):
            augmentation.request_augmentation(caption_request(), self.client)
        post.return_value = self.response(200, ["caption"])
        with self.assertRaises(exceptions.MalformedCompletion):
            augmentation.request_augmentation(caption_request(), self.client)


if __name__ == "__main__":
    unittest.main()
