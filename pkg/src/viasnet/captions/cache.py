import hashlib
import json
import os
import tempfile


def request_key(request):
    h = hashlib.sha256()
    h.update(request.kind.encode())
    h.update(b"\0")
    h.update(request.prompt.encode("utf-8"))
    h.update(b"\0")
    h.update(str(request.frame_index).encode())
    for p in request.parts:
        h.update(b"\0" + p.encode("utf-8"))
    return f"{request.scene_id}:{h.hexdigest()[:16]}"


class CaptionCache:
    """Responses persisted as one JSON object per video, keyed by scene and prompt hash."""

    def __init__(self, directory):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def _path(self, video_id):
        return os.path.join(self.directory, f"{video_id}.json")

    def _load(self, video_id):
        try:
            with open(self._path(video_id), encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return {}

    def get(self, request):
        return self._load(request.video_id).get(request_key(request))

    def put(self, request, text):
        data = self._load(request.video_id)
        data[request_key(request)] = text
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
        os.replace(tmp, self._path(request.video_id))
