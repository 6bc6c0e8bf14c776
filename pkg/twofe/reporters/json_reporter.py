"""JSON reporter for output documents."""

import json
from pathlib import Path

from pydantic import BaseModel

from twofe.helpers.encoder import CustomEncoder


class JSONReporter:
    """Reports output documents as JSON."""

    def save(self, document: BaseModel, output_path: Path) -> Path:
        """Save a document to a JSON file, creating parent directories.

        Args:
            document: Document to save.
            output_path: Path to output JSON file.

        Returns:
            The written path.
        """
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(self.to_string(document) + "\n")
        return output_path

    def load(self, input_path: Path, model: type[BaseModel]) -> BaseModel:
        """Load and validate a document from a JSON file.

        Args:
            input_path: Path to input JSON file.
            model: Document model to validate against.

        Returns:
            The validated document.
        """
        with open(input_path) as f:
            data = json.load(f)

        return model.model_validate(data)

    def to_string(self, document: BaseModel, indent: int = 2) -> str:
        """Convert a document to a JSON string.

        Floats use the shortest representation that reads back to the same value.
        """
        return json.dumps(document.model_dump(mode="json"), indent=indent, cls=CustomEncoder, allow_nan=False)
