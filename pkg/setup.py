from setuptools import setup, find_packages

setup(
    name='nonlocal-gamma-lab',
    version='0.1.0',
    packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
    py_modules=['main', 'run_lab_suite'],
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'matplotlib',
        'jsonschema',
        'configparser'
    ],
    extras_require={
        'test': [
            'pytest',
            'hypothesis',
        ],
    },
    entry_points={
        'console_scripts': [
            'nonlocal-lab=main:main',
        ],
    },
    description='Numerical lab for non-local energies, the Sobolev cut norm and Gamma-convergence experiments',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    python_requires='>=3.8',
)
