"""
Augmentation clients completing partial quadruples.

An understanding sample needs a generation caption and a generation sample
needs a question-answer pair before it can stand as an aligned record.
The client is abstract; a deterministic stub ships for tests and offline
runs, and a remote client posts the request to an HTTP endpoint.
"""

# builtins
import abc
import dataclasses
import logging

# third party
import requests

# modules
import src.constants as constants
import src.exceptions as exceptions


logger: logging.Logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Quadruple:
    """
    Unified (image, caption, question, answer) record.
    """
    id: str
    image: str
    caption: str
    question: str
    answer: str
    origin: constants.Side
    task_type: str = ""

    @property
    def key(self) -> str:
        return f"{self.origin.value}:{self.id}"

    @property
    def is_complete(self) -> bool:
        return all([self.image, self.caption, self.question, self.answer])


@dataclasses.dataclass(frozen=True)
class AugmentationRequest:
    direction: constants.AugmentationDirection
    quadruple: Quadruple
    template_id: str

    def validate(self) -> None:
        """
        A caption request needs question and answer, a QA request needs a caption.
        """
        quadruple: Quadruple = self.quadruple
        if not self.template_id:
            raise exceptions.MalformedRequest("template_id must not be empty")
        if self.direction is constants.AugmentationDirection.COMPLETE_CAPTION:
            if not (quadruple.question and quadruple.answer):
                raise exceptions.MalformedRequest(
                    f"caption completion for {quadruple.key} needs question and answer"
                )
        elif not quadruple.caption:
            raise exceptions.MalformedRequest(f"QA completion for {quadruple.key} needs a caption")

    def to_payload(self) -> dict:
        return {
            "direction": self.direction.value,
            "template_id": self.template_id,
            "quadruple": {
                "id": self.quadruple.id,
                "image": self.quadruple.image,
                "caption": self.quadruple.caption,
                "question": self.quadruple.question,
                "answer": self.quadruple.answer,
                "origin": self.quadruple.origin.value,
            },
        }


class AugmentationClient:
    """
    Completes a request and returns the missing fields as a dictionary:
    {"caption": ...} for caption requests, {"question": ..., "answer": ...}
    for QA requests.
    """

    @abc.abstractmethod
    def complete(self, request: AugmentationRequest) -> dict:
        pass


class StubAugmentationClient(AugmentationClient):
    """
    Deterministic template-derived completions.
    """

    def complete(self, request: AugmentationRequest) -> dict:
        quadruple: Quadruple = request.quadruple
        if request.direction is constants.AugmentationDirection.COMPLETE_CAPTION:
            return {
                "caption": (
                    f"[{request.template_id}] image {quadruple.image}: "
                    f"a scene where the answer to '{quadruple.question}' is '{quadruple.answer}'"
                )
            }
        return {
            "question": f"[{request.template_id}] What is shown in image {quadruple.image}?",
            "answer": quadruple.caption,
        }


class RemoteAugmentationClient(AugmentationClient):
    """
    Posts the request as JSON to an HTTP endpoint and reads the completion
    from the JSON response body.
    """

    def __init__(self, url: str, timeout: float = constants.AUGMENTATION_TIMEOUT) -> None:
        if not url:
            raise exceptions.ClientUnavailable("remote augmentation client needs an url")
        self.url: str = url
        self.timeout: float = timeout

    def complete(self, request: AugmentationRequest) -> dict:
        try:
            response: requests.Response = requests.post(
                self.url, json=request.to_payload(), timeout=self.timeout
            )
        except requests.exceptions.RequestException as re:
            raise exceptions.ClientUnavailable(f"augmentation endpoint unreachable: {re}")
        if response.status_code != 200:
            raise exceptions.ClientUnavailable(
                f"augmentation endpoint answered {response.status_code}: {response.text[:200]}"
            )
        try:
            body: object = response.json()
        except ValueError as ve:
            raise exceptions.MalformedCompletion(f"augmentation response is not JSON: {ve}")
        if not isinstance(body, dict):
            raise exceptions.MalformedCompletion("augmentation response is not an object")
        return body


AUGMENTATION_CLIENTS: dict = {
    "stub": StubAugmentationClient,
    "remote": RemoteAugmentationClient,
}


def make_client(name: str, url: str = "") -> AugmentationClient:
    """
    Augmentation client by name. The remote client posts to `url`.
    """
    if name not in AUGMENTATION_CLIENTS:
        raise exceptions.ConfigError(f"Unknown augmentation client: {name}")
    if name == "remote":
        return RemoteAugmentationClient(url)
    return AUGMENTATION_CLIENTS[name]()


REQUIRED_FIELDS: dict = {
    constants.AugmentationDirection.COMPLETE_CAPTION: ("caption",),
    constants.AugmentationDirection.COMPLETE_QA: ("question", "answer"),
}


def request_augmentation(request: AugmentationRequest, client: AugmentationClient) -> Quadruple:
    """
    Fill the fields the request direction asks for and return the completed quadruple.
    """
    request.validate()
    logger.debug("Requesting %s for %s", request.direction.value, request.quadruple.key)
    completion: dict = client.complete(request)
    filled: dict = {}
    for field in REQUIRED_FIELDS[request.direction]:
        value: object = completion.get(field)
        if not isinstance(value, str) or not value.strip():
            raise exceptions.MalformedCompletion(
                f"completion for {request.quadruple.key} lacks '{field}'"
            )
        filled[field] = value
    return dataclasses.replace(request.quadruple, **filled)
