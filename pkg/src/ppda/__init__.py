"""Privacy-preserving distance approximation toolkit.

Clients never share raw feature vectors with the server. Instead they report
distances to a small set of public anchor points; the server recovers an
embedding from that incomplete distance information, estimates all pairwise
client distances, and feeds the estimates into graph learning and clustering.

Subpackages and modules:

- ``datagen``: synthetic graphs, IGMRF signals, Gaussian blobs, CSV ingestion
- ``protocol``: the client/server distance exchange and matrix assembly
- ``mds``: stress majorization (full and anchored SMACOF), classical MDS
- ``graphlearn``: sample covariance operators, adjacency learning, SGL-lite
- ``cluster``: constrained-Laplacian-rank clustering, connected components
- ``metrics``: relative error, neighborhood F-score, NMI, ARI
- ``pipelines``: end-to-end experiment runner and config validation
- ``service``: FastAPI app exposing the pipeline stages
- ``cli``: thin command-line client for the service
"""

__version__ = "0.1.0"
